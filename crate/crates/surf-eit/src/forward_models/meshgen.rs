//! Mesh generation for the named surface families.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use spade::{ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::mesh::{BoundaryLoop, CoverData, Family, SurfaceMesh};
use crate::error::{Result, SurfError};

/// Area bound relative to h² (an equilateral triangle of side h has 0.433·h²).
const AREA_FACTOR: f64 = 0.6;
/// Node spacing on hole boundaries relative to h.
const HOLE_GRADING: f64 = 0.6;
const METRIC_BOUNDS: (f64, f64) = (1e-6, 1e6);

fn even_count(len: f64, h: f64) -> usize {
    let n = (len / h).ceil() as usize;
    (n + n % 2).max(16)
}

struct Pslg {
    points: Vec<[f64; 2]>,
    segments: Vec<(usize, usize)>,
}

impl Pslg {
    fn new() -> Self {
        Pslg { points: Vec::new(), segments: Vec::new() }
    }

    fn push(&mut self, p: [f64; 2]) -> usize {
        self.points.push(p);
        self.points.len() - 1
    }

    fn closed_polyline(&mut self, ids: &[usize]) {
        for i in 0..ids.len() {
            self.segments.push((ids[i], ids[(i + 1) % ids.len()]));
        }
    }

    fn circle(&mut self, c: [f64; 2], r: f64, n: usize) -> Vec<usize> {
        let ids: Vec<usize> = (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                self.push([c[0] + r * t.cos(), c[1] + r * t.sin()])
            })
            .collect();
        self.closed_polyline(&ids);
        ids
    }
}

/// Refined constrained Delaunay triangulation of the region enclosed by the
/// constraint segments (odd winding). Input points keep their indices.
fn triangulate(pslg: &Pslg, max_area: f64) -> Result<(Vec<[f64; 2]>, Vec<[usize; 3]>)> {
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    let mut handles = Vec::with_capacity(pslg.points.len());
    for p in &pslg.points {
        let h = cdt
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| SurfError::DegenerateParameters(format!("mesh insertion: {e:?}")))?;
        handles.push(h);
    }
    for &(a, b) in &pslg.segments {
        cdt.add_constraint(handles[a], handles[b]);
    }
    let est = (pslg_area(pslg) / max_area * 4.0) as usize + 1000;
    let params = RefinementParameters::<f64>::new()
        .with_max_allowed_area(max_area)
        .keep_constraint_edges()
        .exclude_outer_faces(true)
        .with_max_additional_vertices(est);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(SurfError::DegenerateParameters("mesh refinement did not complete".into()));
    }
    let excluded: HashSet<_> = result.excluded_faces.into_iter().collect();
    let mut index: HashMap<usize, usize> = HashMap::new();
    for (i, h) in handles.iter().enumerate() {
        index.insert(h.index(), i);
    }
    let mut vertices = pslg.points.clone();
    for v in cdt.vertices() {
        let k = v.fix().index();
        if let std::collections::hash_map::Entry::Vacant(e) = index.entry(k) {
            e.insert(vertices.len());
            let p = v.position();
            vertices.push([p.x, p.y]);
        }
    }
    let mut triangles = Vec::new();
    for f in cdt.inner_faces() {
        if excluded.contains(&f.fix()) {
            continue;
        }
        let vs = f.vertices();
        let mut t = [index[&vs[0].fix().index()], index[&vs[1].fix().index()], index[&vs[2].fix().index()]];
        let (p, q, r) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
        if (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]) < 0.0 {
            t.swap(1, 2);
        }
        triangles.push(t);
    }
    Ok((vertices, triangles))
}

fn pslg_area(p: &Pslg) -> f64 {
    let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
    for q in &p.points {
        for d in 0..2 {
            lo[d] = lo[d].min(q[d]);
            hi[d] = hi[d].max(q[d]);
        }
    }
    (hi[0] - lo[0]) * (hi[1] - lo[1])
}

/// Drops unused vertices and applies an identification map `rep`.
fn compact(
    vertices: &[[f64; 2]],
    triangles: &[[usize; 3]],
    rep: &dyn Fn(usize) -> usize,
) -> (Vec<[f64; 2]>, Vec<[usize; 3]>, Vec<Option<usize>>) {
    let mut new_id = vec![None; vertices.len()];
    let mut out = Vec::new();
    let mut tris = Vec::with_capacity(triangles.len());
    for t in triangles {
        let mut nt = [0; 3];
        for k in 0..3 {
            let r = rep(t[k]);
            nt[k] = *new_id[r].get_or_insert_with(|| {
                out.push(vertices[r]);
                out.len() - 1
            });
        }
        tris.push(nt);
    }
    let map: Vec<Option<usize>> = (0..vertices.len()).map(|v| new_id[rep(v)]).collect();
    (out, tris, map)
}

fn make_loop(vertices: Vec<usize>, length: f64, orientation: f64) -> BoundaryLoop {
    let n = vertices.len();
    let arclength = (0..n).map(|i| length * i as f64 / n as f64).collect();
    BoundaryLoop { vertices, length, orientation, arclength }
}

/// Builds a mesh of `family` with target edge length `h` (in metric units).
pub fn build_mesh(family: &Family, h: f64) -> Result<SurfaceMesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(SurfError::DegenerateParameters(format!("edge length h = {h}")));
    }
    match *family {
        Family::Disk => planar(family, 1.0, None, h),
        Family::Annulus { rho } => {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(SurfError::DegenerateParameters(format!("annulus inner radius {rho}")));
            }
            planar(family, 1.0, Some(rho), h)
        }
        Family::Mobius { r } => mobius(family, r, None, h),
        Family::MobiusWithHole { r, hole } => mobius(family, r, Some(hole), h),
        Family::TorusWithHole { hole } => torus(family, hole, h),
    }
}

fn planar(family: &Family, outer: f64, inner: Option<f64>, h: f64) -> Result<SurfaceMesh> {
    let mut p = Pslg::new();
    let n_out = even_count(2.0 * PI * outer, h);
    let out_ids = p.circle([0.0, 0.0], outer, n_out);
    let in_ids = inner.map(|rho| {
        let n_in = even_count(2.0 * PI * rho, h);
        p.circle([0.0, 0.0], rho, n_in)
    });
    let (v, t) = triangulate(&p, AREA_FACTOR * h * h)?;
    let (vertices, triangles, map) = compact(&v, &t, &|i| i);
    let remap = |ids: &[usize]| ids.iter().map(|&i| map[i].expect("boundary vertex kept")).collect::<Vec<_>>();
    let mut boundary = vec![make_loop(remap(&out_ids), 2.0 * PI * outer, 1.0)];
    if let (Some(ids), Some(rho)) = (in_ids, inner) {
        boundary.push(make_loop(remap(&ids), 2.0 * PI * rho, -1.0));
    }
    let metrics = vec![[1.0, 0.0, 1.0]; triangles.len()];
    let mesh = SurfaceMesh {
        family: family.clone(),
        vertices,
        triangles,
        metrics,
        period: [None, None],
        boundary,
        orientable: true,
        cover: None,
        ground_truth_log_k: 0.0,
        perturbed: false,
        metric_bounds: METRIC_BOUNDS,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Möbius band (optionally with a hole) as the cylinder [−ln R, ln R] × S¹
/// with metric R²(dx² + dy²) and deck involution τ(x, y) = (−x, y + π).
fn mobius(family: &Family, r: f64, hole: Option<f64>, h: f64) -> Result<SurfaceMesh> {
    if !(r > 1.0) {
        return Err(SurfError::DegenerateParameters(format!("Möbius radius R = {r} must exceed 1")));
    }
    let l = r.ln();
    if let Some(d) = hole {
        if !(d > 0.0 && d < l.min(PI / 2.0) * 0.85) {
            return Err(SurfError::DegenerateParameters(format!("hole radius {d} does not fit")));
        }
    }
    let hc = h / r;
    let n = even_count(2.0 * PI * r, h);
    let half = n / 2;
    let m = ((2.0 * l / hc).round() as usize).max(2);
    let xs: Vec<f64> = (0..=m).map(|j| l * (2.0 * j as f64 - m as f64) / m as f64).collect();
    let ys: Vec<f64> = (0..=half).map(|i| 2.0 * PI * i as f64 / n as f64).collect();

    let mut p = Pslg::new();
    let bottom: Vec<usize> = xs.iter().map(|&x| p.push([x, 0.0])).collect();
    let right_inner: Vec<usize> = ys[1..half].iter().map(|&y| p.push([l, y])).collect();
    let top: Vec<usize> = xs.iter().map(|&x| p.push([x, PI])).collect();
    let left_inner: Vec<usize> = ys[1..half].iter().map(|&y| p.push([-l, y])).collect();
    let mut ring = bottom.clone();
    ring.extend(&right_inner);
    ring.extend(top.iter().rev());
    ring.extend(left_inner.iter().rev());
    p.closed_polyline(&ring);
    let hole_ids = hole.map(|d| {
        let nh = even_count(2.0 * PI * r * d, HOLE_GRADING * h);
        p.circle([0.0, PI / 2.0], d, nh)
    });

    let (dv, dt) = triangulate(&p, AREA_FACTOR * hc * hc)?;
    let (dv, dt, map) = compact(&dv, &dt, &|i| i);
    let id = |i: usize| map[i].expect("boundary vertex kept");
    let bottom: Vec<usize> = bottom.iter().map(|&i| id(i)).collect();
    let top: Vec<usize> = top.iter().map(|&i| id(i)).collect();
    let right_inner: Vec<usize> = right_inner.iter().map(|&i| id(i)).collect();
    let left_inner: Vec<usize> = left_inner.iter().map(|&i| id(i)).collect();

    // copy(v) = τ(v) for fundamental-domain vertices.
    let nd = dv.len();
    let mut copy = vec![usize::MAX; nd];
    for j in 0..=m {
        copy[bottom[j]] = top[m - j];
        copy[top[j]] = bottom[m - j];
    }
    let mut vertices = dv.clone();
    for v in 0..nd {
        if copy[v] == usize::MAX {
            copy[v] = vertices.len();
            vertices.push([-dv[v][0], dv[v][1] + PI]);
        }
    }
    let mut tau = vec![usize::MAX; vertices.len()];
    for v in 0..nd {
        tau[v] = copy[v];
        if copy[v] >= nd {
            tau[copy[v]] = v;
        }
    }
    let mut triangles = dt.clone();
    for t in &dt {
        triangles.push([copy[t[0]], copy[t[2]], copy[t[1]]]);
    }
    let mut projection = vec![usize::MAX; vertices.len()];
    let mut orbit = 0;
    for v in 0..vertices.len() {
        if projection[v] == usize::MAX {
            projection[v] = orbit;
            projection[tau[v]] = orbit;
            orbit += 1;
        }
    }

    let mut outer = Vec::with_capacity(n);
    outer.push(bottom[m]);
    outer.extend(&right_inner);
    outer.push(top[m]);
    outer.extend(left_inner.iter().map(|&v| copy[v]));
    let mut boundary = vec![make_loop(outer, 2.0 * PI * r, 1.0)];
    if let (Some(ids), Some(d)) = (hole_ids, hole) {
        boundary.push(make_loop(ids.iter().map(|&i| id(i)).collect(), 2.0 * PI * r * d, -1.0));
    }
    let minus_loops = boundary.iter().map(|b| b.vertices.iter().map(|&v| tau[v]).collect()).collect();
    let metrics = vec![[r * r, 0.0, r * r]; triangles.len()];
    let mesh = SurfaceMesh {
        family: family.clone(),
        vertices,
        triangles,
        metrics,
        period: [None, Some(2.0 * PI)],
        boundary,
        orientable: false,
        cover: Some(CoverData { tau, projection, minus_loops }),
        ground_truth_log_k: 0.0,
        perturbed: false,
        metric_bounds: METRIC_BOUNDS,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Flat unit torus with a round hole centred at (½, ½).
fn torus(family: &Family, hole: f64, h: f64) -> Result<SurfaceMesh> {
    if !(hole > 0.0 && hole < 0.4) {
        return Err(SurfError::DegenerateParameters(format!("torus hole radius {hole}")));
    }
    let k = ((1.0 / h).round() as usize).max(4);
    let c: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
    let mut p = Pslg::new();
    let bottom: Vec<usize> = c.iter().map(|&x| p.push([x, 0.0])).collect();
    let right: Vec<usize> = c[1..k].iter().map(|&y| p.push([1.0, y])).collect();
    let top: Vec<usize> = c.iter().map(|&x| p.push([x, 1.0])).collect();
    let left: Vec<usize> = c[1..k].iter().map(|&y| p.push([0.0, y])).collect();
    let mut ring = bottom.clone();
    ring.extend(&right);
    ring.extend(top.iter().rev());
    ring.extend(left.iter().rev());
    p.closed_polyline(&ring);
    let nh = even_count(2.0 * PI * hole, HOLE_GRADING * h);
    let hole_ids = p.circle([0.5, 0.5], hole, nh);
    let (v, t) = triangulate(&p, AREA_FACTOR * h * h)?;
    let mut rep: Vec<usize> = (0..v.len()).collect();
    for j in 0..=k {
        rep[top[j]] = bottom[j];
    }
    for j in 0..k - 1 {
        rep[right[j]] = left[j];
    }
    rep[bottom[k]] = bottom[0];
    rep[top[0]] = bottom[0];
    rep[top[k]] = bottom[0];
    let (vertices, triangles, map) = compact(&v, &t, &|i| rep[i]);
    let ids: Vec<usize> = hole_ids.iter().map(|&i| map[i].expect("hole vertex kept")).collect();
    let metrics = vec![[1.0, 0.0, 1.0]; triangles.len()];
    let mesh = SurfaceMesh {
        family: family.clone(),
        vertices,
        triangles,
        metrics,
        period: [Some(1.0), Some(1.0)],
        boundary: vec![make_loop(ids, 2.0 * PI * hole, -1.0)],
        orientable: true,
        cover: None,
        ground_truth_log_k: 0.0,
        perturbed: false,
        metric_bounds: METRIC_BOUNDS,
    };
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_triangle_count_matches_area_estimate() {
        let m = build_mesh(&Family::Disk, 0.05).unwrap();
        let est = PI / (0.05f64.powi(2) * 0.43);
        let n = m.triangles.len() as f64;
        assert!(n > est / 2.0 && n < est * 2.0, "{n} vs {est}");
        assert_eq!(m.boundary.len(), 1);
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn euler_characteristics_of_families() {
        let h = 0.15;
        assert_eq!(build_mesh(&Family::Annulus { rho: 0.5 }, h).unwrap().euler_characteristic(), 0);
        let mob = build_mesh(&Family::Mobius { r: 2.0 }, h).unwrap();
        assert!(!mob.orientable);
        assert_eq!(mob.stored_euler(), 0);
        let mh = build_mesh(&Family::MobiusWithHole { r: 2.0, hole: 0.4 }, h).unwrap();
        assert_eq!(mh.stored_euler(), -2);
        assert_eq!(mh.euler_characteristic(), -1);
        let t = build_mesh(&Family::TorusWithHole { hole: 0.25 }, h).unwrap();
        assert_eq!(t.euler_characteristic(), -1);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_mesh(&Family::Annulus { rho: 1.2 }, 0.1).is_err());
        assert!(build_mesh(&Family::Mobius { r: 0.5 }, 0.1).is_err());
        assert!(build_mesh(&Family::Disk, -1.0).is_err());
    }
}
