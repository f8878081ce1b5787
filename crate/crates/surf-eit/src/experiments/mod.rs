//! Configuration-driven runs behind the command-line tool.

pub mod config;
pub mod model;
pub mod runs;
pub mod sweep;

pub use config::{ExperimentConfig, ModelKind, SurfaceConfig, SweepConfig, Tolerances};
pub use model::Model;
pub use runs::{
    forward_report, mode_checks, oracle_for, run_forward, run_reconstruct, run_topology_probe, run_traces, topology_verdict, ForwardReport, ModeCheck,
    ReconstructReport, TopologyVerdict, TracesReport,
};
pub use sweep::{fit_loglog, plot_script, run_stability_sweep, write_plot_data, write_sweep_csv, SlopeFit, SweepResult, SweepRow, Verdict};
