//! Boundary operator algebra on DN maps: trace equations, orientability and
//! Euler-characteristic probes, null sets and the transfer of traces.

pub mod maps;
pub mod nullspace;
pub mod operators;
pub mod probe;
pub mod traces;
pub mod transfer;

pub use maps::{rank_analysis, AdmissibleMapHandle, MapKind, RankAnalysis, TrialSpace};
pub use nullspace::{find_anchor, null_space, null_space_at, NullSpaceBasis, NullSpaceConfig};
pub use operators::{d_terms, frak_d, frak_n, frak_q, g1_linearization, g2_term, g_map, g_relative, j_lambda, n_terms, q_terms, GAnchor};
pub use probe::{default_trials, euler_characteristic, orientability_probe, EulerReport, Orientability, ProbeConfig, ProbeReport, RankConfig};
pub use traces::{c_ratio, c_ratio_detailed, orientable_trace_solve, symmetric_trace, trace_constants, transfer_trace, CRatio, SymmetricTraceData};
pub use transfer::{transfer_y, TransferConfig, TransferResult};
