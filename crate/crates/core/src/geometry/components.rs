//! Path components of `∂X` from a marching grid on every face.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dist2, Face, FaceQuadric};
use crate::error::{Error, Result};
use crate::forms::QuadraticForm;

/// Shrink applied to the mesh diameter so that `d1` is a lower estimate.
pub const DIAMETER_SAFETY: f64 = 0.9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Component {
    pub samples: usize,
    /// Two-sweep lower bound of the mesh diameter.
    pub diameter: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentReport {
    pub h: f64,
    pub components: Vec<Component>,
    /// Lower estimate of the least component diameter.
    pub d1: f64,
    /// Lower estimate of the least distance between components; `+inf` for one component.
    pub d2: f64,
}

/// Crossing points of the face quadric on a grid of spacing about `h` over `[-1,1]^d`.
fn march_face(q: &FaceQuadric, h: f64) -> Vec<Vec<f64>> {
    let d = q.coeffs.len();
    let n = ((2.0 / h).round() as usize).max(2);
    let step = 2.0 / n as f64;
    let coord = |i: usize| -1.0 + step * i as f64;
    // the first local coordinate is split across threads
    (0..=n)
        .into_par_iter()
        .flat_map_iter(|i0| {
            let mut out = Vec::new();
            let mut idx = vec![0usize; d];
            idx[0] = i0;
            let mut point = vec![0.0; d];
            loop {
                for (p, &i) in point.iter_mut().zip(&idx) {
                    *p = coord(i);
                }
                let f0 = q.value(&point);
                if f0 == 0.0 {
                    out.push(point.clone());
                }
                for j in 0..d {
                    if idx[j] == n {
                        continue;
                    }
                    let mut next = point.clone();
                    next[j] = coord(idx[j] + 1);
                    let f1 = q.value(&next);
                    if f0 != 0.0 && f1 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
                        let t = f0 / (f0 - f1);
                        let mut c = point.clone();
                        c[j] += t * step;
                        out.push(c);
                    }
                }
                // odometer over coordinates 1..d
                let mut k = 1;
                while k < d {
                    idx[k] += 1;
                    if idx[k] <= n {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == d {
                    break;
                }
            }
            out
        })
        .collect()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

fn cell_of(x: &[f64], size: f64) -> Vec<i64> {
    x.iter().map(|v| (v / size).floor() as i64).collect()
}

fn neighbor_cells(cell: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![cell.to_vec()];
    for j in 0..cell.len() {
        let mut next = Vec::with_capacity(out.len() * 3);
        for c in &out {
            for delta in [-1, 0, 1] {
                let mut c2 = c.clone();
                c2[j] += delta;
                next.push(c2);
            }
        }
        out = next;
    }
    out
}

fn farthest(points: &[&Vec<f64>], from: &[f64]) -> (usize, f64) {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, dist2(p, from)))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Meshes `∂X` at resolution `h` and returns the component diameters and separations.
pub fn component_geometry(form: &QuadraticForm, h: f64) -> Result<ComponentReport> {
    if form.d() < 2 {
        return Err(Error::Precondition("component geometry needs d >= 2".into()));
    }
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::Precondition(format!("mesh resolution {h} out of range")));
    }
    let mut points: Vec<Vec<f64>> = Vec::new();
    for face in Face::all(form.dim()) {
        let q = FaceQuadric::new(form, face);
        if !q.meets_face() {
            continue;
        }
        points.extend(march_face(&q, h).into_iter().map(|l| face.from_local(&l)));
    }
    assert!(!points.is_empty(), "some face must meet the light cone");

    let link = 3.0 * h;
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell_of(p, link)).or_default().push(i);
    }
    let mut uf = UnionFind((0..points.len()).collect());
    for (i, p) in points.iter().enumerate() {
        for c in neighbor_cells(&cell_of(p, link)) {
            if let Some(bucket) = grid.get(&c) {
                for &j in bucket {
                    if j > i && dist2(p, &points[j]) <= link {
                        uf.union(i, j);
                    }
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..points.len() {
        let r = uf.find(i);
        groups.entry(r).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.sort_by_key(|g| g[0]);

    let components: Vec<Component> = groups
        .iter()
        .map(|g| {
            let pts: Vec<&Vec<f64>> = g.iter().map(|&i| &points[i]).collect();
            let (a, _) = farthest(&pts, pts[0]);
            let (_, diam) = farthest(&pts, pts[a]);
            Component { samples: pts.len(), diameter: diam }
        })
        .collect();
    let d1 = DIAMETER_SAFETY * components.iter().map(|c| c.diameter).fold(f64::INFINITY, f64::min);

    // one representative per coarse cell; every point is within g*sqrt(dim) of one
    let g = 0.01f64.max(2.0 * h);
    let reps: Vec<Vec<&Vec<f64>>> = groups
        .iter()
        .map(|grp| {
            let mut seen: HashMap<Vec<i64>, &Vec<f64>> = HashMap::new();
            for &i in grp {
                seen.entry(cell_of(&points[i], g)).or_insert(&points[i]);
            }
            let mut v: Vec<&Vec<f64>> = seen.into_values().collect();
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite mesh points"));
            v
        })
        .collect();
    let mut dmin = f64::INFINITY;
    for a in 0..reps.len() {
        for b in a + 1..reps.len() {
            for p in &reps[a] {
                for q in &reps[b] {
                    dmin = dmin.min(dist2(p, q));
                }
            }
        }
    }
    let slack = 2.0 * g * (form.dim() as f64).sqrt();
    let d2 = if dmin.is_finite() { dmin - slack - 2.0 * h } else { f64::INFINITY };
    Ok(ComponentReport { h, components, d1, d2 })
}
