//! Octahedral triangulations of the sphere with four puncture discs removed.
//!
//! One octant face is subdivided and reflected across the coordinate planes, so
//! the node set is closed under every sign change of the coordinates exactly.
//! Discs about `(0, 0, +-1)` and `(+-1, 0, 0)` are carved out and the rim nodes
//! are snapped onto the boundary circles with sign-symmetric formulas.

use std::collections::{HashMap, HashSet};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Location of a node relative to the four boundary circles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Interior,
    /// circle about `(0, 0, 1)`, the truncation curve `x = C0`
    C1,
    /// circle about `(0, 0, -1)`, `x = -C0`
    C2,
    /// circle about `(1, 0, 0)`, `z = C0`
    C3,
    /// circle about `(-1, 0, 0)`, `z = -C0`
    C4,
}

impl BoundaryTag {
    pub const CIRCLES: [BoundaryTag; 4] = [BoundaryTag::C1, BoundaryTag::C2, BoundaryTag::C3, BoundaryTag::C4];

    pub fn is_boundary(self) -> bool {
        self != BoundaryTag::Interior
    }

    /// Puncture centre of a boundary circle.
    pub fn center(self) -> Option<Vector3<f64>> {
        match self {
            BoundaryTag::Interior => None,
            BoundaryTag::C1 => Some(Vector3::new(0.0, 0.0, 1.0)),
            BoundaryTag::C2 => Some(Vector3::new(0.0, 0.0, -1.0)),
            BoundaryTag::C3 => Some(Vector3::new(1.0, 0.0, 0.0)),
            BoundaryTag::C4 => Some(Vector3::new(-1.0, 0.0, 0.0)),
        }
    }
}

/// Triangulation of the punctured (or closed) unit sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<Vector3<f64>>,
    /// Outward-oriented index triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_tag: Vec<BoundaryTag>,
    /// Node permutation of the reflection `y -> -y`.
    pub rxz: Vec<usize>,
    /// Node permutation of the reflection `x -> -x`.
    pub ryz: Vec<usize>,
    /// Puncture radius; zero for the closed sphere.
    pub phi0: f64,
    pub refinement: u32,
}

/// Segments per octant edge at a refinement level.
pub fn segments_for(refinement: u32) -> usize {
    2usize << refinement
}

fn key(v: &Vector3<f64>) -> [u64; 3] {
    // +0.0 and -0.0 must coincide
    [(v.x + 0.0).to_bits(), (v.y + 0.0).to_bits(), (v.z + 0.0).to_bits()]
}

fn octahedral_sphere(m: usize) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let mut local = HashMap::new();
    let mut pts = Vec::new();
    for i in 0..=m {
        for j in 0..=(m - i) {
            let k = m - i - j;
            local.insert((i, j), pts.len());
            pts.push(Vector3::new(i as f64, j as f64, k as f64).normalize());
        }
    }
    let mut tris = Vec::new();
    for i in 0..m {
        for j in 0..(m - i) {
            tris.push([local[&(i, j)], local[&(i + 1, j)], local[&(i, j + 1)]]);
            if i + j + 1 < m {
                tris.push([local[&(i + 1, j)], local[&(i + 1, j + 1)], local[&(i, j + 1)]]);
            }
        }
    }

    let mut nodes: Vec<Vector3<f64>> = Vec::new();
    let mut index: HashMap<[u64; 3], usize> = HashMap::new();
    let mut triangles = Vec::new();
    for signs in 0..8u32 {
        let s = Vector3::new(
            if signs & 1 == 0 { 1.0 } else { -1.0 },
            if signs & 2 == 0 { 1.0 } else { -1.0 },
            if signs & 4 == 0 { 1.0 } else { -1.0 },
        );
        let map: Vec<usize> = pts
            .iter()
            .map(|p| {
                let q = p.component_mul(&s);
                *index.entry(key(&q)).or_insert_with(|| {
                    nodes.push(q);
                    nodes.len() - 1
                })
            })
            .collect();
        let flip = s.x * s.y * s.z < 0.0;
        for t in &tris {
            let t = [map[t[0]], map[t[1]], map[t[2]]];
            triangles.push(if flip { [t[0], t[2], t[1]] } else { t });
        }
    }
    (nodes, triangles)
}

/// Which puncture a point is nearest to and the geodesic distance to it.
fn nearest_puncture(n: &Vector3<f64>) -> (BoundaryTag, f64) {
    if n.x.abs() >= n.z.abs() {
        let tag = if n.x >= 0.0 { BoundaryTag::C3 } else { BoundaryTag::C4 };
        (tag, n.x.abs().min(1.0).acos())
    } else {
        let tag = if n.z >= 0.0 { BoundaryTag::C1 } else { BoundaryTag::C2 };
        (tag, n.z.abs().min(1.0).acos())
    }
}

/// Radial projection onto the circle of geodesic radius `phi0` about a puncture.
fn snap(n: &Vector3<f64>, tag: BoundaryTag, phi0: f64) -> Vector3<f64> {
    let (s, c) = phi0.sin_cos();
    match tag {
        BoundaryTag::C3 | BoundaryTag::C4 => {
            let r = (n.y * n.y + n.z * n.z).sqrt();
            Vector3::new(c.copysign(n.x), s * n.y / r, s * n.z / r)
        }
        BoundaryTag::C1 | BoundaryTag::C2 => {
            let r = (n.x * n.x + n.y * n.y).sqrt();
            Vector3::new(s * n.x / r, s * n.y / r, c.copysign(n.z))
        }
        BoundaryTag::Interior => *n,
    }
}

fn edge(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn edge_counts(tris: &[[usize; 3]]) -> HashMap<(usize, usize), usize> {
    let mut counts = HashMap::new();
    for t in tris {
        for k in 0..3 {
            *counts.entry(edge(t[k], t[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    counts
}

fn mirror_maps(nodes: &[Vector3<f64>]) -> Result<(Vec<usize>, Vec<usize>)> {
    let index: HashMap<[u64; 3], usize> = nodes.iter().enumerate().map(|(i, n)| (key(n), i)).collect();
    let find = |v: Vector3<f64>| {
        index.get(&key(&v)).copied().ok_or_else(|| Error::ReflectionMismatch { mismatch: f64::INFINITY })
    };
    let rxz = nodes.iter().map(|n| find(Vector3::new(n.x, -n.y, n.z))).collect::<Result<Vec<_>>>()?;
    let ryz = nodes.iter().map(|n| find(Vector3::new(-n.x, n.y, n.z))).collect::<Result<Vec<_>>>()?;
    Ok((rxz, ryz))
}

/// Closed sphere triangulation used to validate the discrete operators.
pub fn build_closed_sphere(refinement: u32) -> Result<Mesh> {
    let m = segments_for(refinement);
    let (nodes, triangles) = octahedral_sphere(m);
    let (rxz, ryz) = mirror_maps(&nodes)?;
    let n = nodes.len();
    Ok(Mesh { nodes, triangles, boundary_tag: vec![BoundaryTag::Interior; n], rxz, ryz, phi0: 0.0, refinement })
}

/// Triangulation of the sphere minus four geodesic discs of radius `phi0`.
pub fn build_mesh(phi0: f64, refinement: u32) -> Result<Mesh> {
    if !(phi0 > 0.0 && phi0 < std::f64::consts::FRAC_PI_4) {
        return Err(Error::InfeasiblePhi0 { phi0 });
    }
    let m = segments_for(refinement);
    let spacing = 1.0 / m as f64;
    if phi0 < 1.5 * spacing {
        return Err(Error::InvalidParameter(format!(
            "refinement {refinement} is too coarse for phi0 = {phi0}; need phi0 >= {:.4}",
            1.5 * spacing
        )));
    }
    let (mut nodes, tris) = octahedral_sphere(m);
    let margin = 0.25 * spacing;
    let mut removed: Vec<bool> = nodes.iter().map(|n| nearest_puncture(n).1 < phi0 + margin).collect();
    let mut dead_tri = vec![false; tris.len()];

    // Drop triangles that would straddle a hole after snapping: those whose
    // interior edge joins two rim nodes. The side facing the hole goes.
    loop {
        for (t, tri) in tris.iter().enumerate() {
            if tri.iter().any(|&v| removed[v]) {
                dead_tri[t] = true;
            }
        }
        let kept: Vec<usize> = (0..tris.len()).filter(|&t| !dead_tri[t]).collect();
        let kept_tris: Vec<[usize; 3]> = kept.iter().map(|&t| tris[t]).collect();
        let counts = edge_counts(&kept_tris);
        let rim: HashSet<usize> = counts.iter().filter(|(_, &c)| c == 1).flat_map(|(&(a, b), _)| [a, b]).collect();
        let mut bad = Vec::new();
        for &t in &kept {
            let tri = tris[t];
            for k in 0..3 {
                let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                if rim.contains(&a) && rim.contains(&b) && counts[&edge(a, b)] == 2 {
                    let (ta, _) = nearest_puncture(&nodes[a]);
                    let (tb, _) = nearest_puncture(&nodes[b]);
                    if ta != tb {
                        continue;
                    }
                    // the opposite vertex on the hole side is the nearer one
                    let other = kept
                        .iter()
                        .copied()
                        .find(|&u| u != t && tris[u].contains(&a) && tris[u].contains(&b))
                        .expect("interior edge has two triangles");
                    let opp = tris[other].iter().copied().find(|&v| v != a && v != b).unwrap();
                    let center = ta.center().unwrap();
                    let here = nodes[c].dot(&center);
                    let there = nodes[opp].dot(&center);
                    bad.push(if here > there { t } else { other });
                }
            }
        }
        if bad.is_empty() {
            break;
        }
        for t in bad {
            dead_tri[t] = true;
        }
        // nodes left without triangles are removed
        let mut used = vec![false; nodes.len()];
        for (t, tri) in tris.iter().enumerate() {
            if !dead_tri[t] {
                tri.iter().for_each(|&v| used[v] = true);
            }
        }
        for (v, u) in used.iter().enumerate() {
            if !u {
                removed[v] = true;
            }
        }
    }

    let kept_tris: Vec<[usize; 3]> = (0..tris.len()).filter(|&t| !dead_tri[t]).map(|t| tris[t]).collect();
    let counts = edge_counts(&kept_tris);
    let mut tag = vec![BoundaryTag::Interior; nodes.len()];
    for (&(a, b), &c) in &counts {
        if c == 1 {
            for v in [a, b] {
                tag[v] = nearest_puncture(&nodes[v]).0;
            }
        }
    }
    for v in 0..nodes.len() {
        if tag[v].is_boundary() {
            nodes[v] = snap(&nodes[v], tag[v], phi0);
        }
    }

    // Compact the node list.
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut new_nodes = Vec::new();
    let mut new_tags = Vec::new();
    for t in &kept_tris {
        for &v in t {
            if remap[v] == usize::MAX {
                remap[v] = new_nodes.len();
                new_nodes.push(nodes[v]);
                new_tags.push(tag[v]);
            }
        }
    }
    let triangles: Vec<[usize; 3]> = kept_tris.iter().map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]]).collect();
    let (rxz, ryz) = mirror_maps(&new_nodes)?;
    let mut mesh = Mesh { nodes: new_nodes, triangles, boundary_tag: new_tags, rxz, ryz, phi0, refinement };
    mesh.smooth_near_boundary(4.0 * spacing + phi0, 4);
    mesh.check_quality()?;
    Ok(mesh)
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_closed(&self) -> bool {
        self.phi0 == 0.0
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| !self.boundary_tag[i].is_boundary())
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| self.boundary_tag[i].is_boundary())
    }

    /// Undirected edges, each listed once with the smaller index first.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = edge_counts(&self.triangles).into_keys().collect();
        e.sort_unstable();
        e
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.nodes.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// Sorted adjacency lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (a, b) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj.iter_mut().for_each(|v| v.sort_unstable());
        adj
    }

    /// Largest edge length.
    pub fn max_edge_length(&self) -> f64 {
        self.edges().iter().map(|&(a, b)| (self.nodes[a] - self.nodes[b]).norm()).fold(0.0, f64::max)
    }

    /// Apply a coordinate-sign map to node indices: returns the image of `i`
    /// under `(x, y, z) -> (sx x, sy y, z)`.
    pub fn mirror(&self, i: usize, flip_y: bool, flip_x: bool) -> usize {
        let mut j = i;
        if flip_y {
            j = self.rxz[j];
        }
        if flip_x {
            j = self.ryz[j];
        }
        j
    }

    /// Jacobi smoothing of interior nodes close to a puncture. Only nodes with
    /// non-negative coordinates are updated directly; their mirror images are
    /// set by exact sign changes so the node set stays symmetric bit for bit.
    fn smooth_near_boundary(&mut self, radius: f64, sweeps: usize) {
        let adj = self.neighbors();
        let index: HashMap<[u64; 3], usize> = self.nodes.iter().enumerate().map(|(i, n)| (key(n), i)).collect();
        let reps: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| {
                let n = self.nodes[i];
                n.x >= 0.0 && n.y >= 0.0 && n.z >= 0.0 && !self.boundary_tag[i].is_boundary() && nearest_puncture(&n).1 < radius
            })
            .collect();
        // mirror images of each representative, with the signs that produce them
        let images: Vec<Vec<(usize, Vector3<f64>)>> = reps
            .iter()
            .map(|&i| {
                let n = self.nodes[i];
                let mut out: Vec<(usize, Vector3<f64>)> = Vec::new();
                for signs in 0..8u32 {
                    let s = Vector3::new(
                        if signs & 1 == 0 { 1.0 } else { -1.0 },
                        if signs & 2 == 0 { 1.0 } else { -1.0 },
                        if signs & 4 == 0 { 1.0 } else { -1.0 },
                    );
                    let j = index[&key(&n.component_mul(&s))];
                    if !out.iter().any(|&(k, _)| k == j) {
                        out.push((j, s));
                    }
                }
                out
            })
            .collect();
        for _ in 0..sweeps {
            let updates: Vec<Vector3<f64>> = reps
                .iter()
                .map(|&i| {
                    let mut avg = Vector3::zeros();
                    for &j in &adj[i] {
                        avg += self.nodes[j];
                    }
                    let old = self.nodes[i];
                    for k in 0..3 {
                        if old[k] == 0.0 {
                            avg[k] = 0.0;
                        }
                    }
                    avg.normalize()
                })
                .collect();
            for (r, p) in updates.iter().enumerate() {
                for &(j, s) in &images[r] {
                    self.nodes[j] = p.component_mul(&s);
                }
            }
        }
    }

    /// Reject inverted or badly shaped triangles.
    pub fn check_quality(&self) -> Result<()> {
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|v| self.nodes[v]);
            let normal = (b - a).cross(&(c - a));
            if normal.dot(&(a + b + c)) <= 0.0 {
                return Err(Error::DegenerateTriangle { triangle: t, reason: "inverted orientation".into() });
            }
            let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            let aspect = longest * longest / normal.norm();
            if aspect > 20.0 {
                return Err(Error::DegenerateTriangle { triangle: t, reason: format!("aspect ratio {aspect:.1}") });
            }
        }
        Ok(())
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut best = std::f64::consts::PI;
        for tri in &self.triangles {
            for k in 0..3 {
                let p = self.nodes[tri[k]];
                let u = self.nodes[tri[(k + 1) % 3]] - p;
                let v = self.nodes[tri[(k + 2) % 3]] - p;
                best = best.min(u.angle(&v));
            }
        }
        best
    }

    /// Boundary loops as ordered node lists.
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let counts = edge_counts(&self.triangles);
        let mut next: HashMap<usize, usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if counts[&edge(a, b)] == 1 {
                    next.insert(a, b);
                }
            }
        }
        let mut seen = HashSet::new();
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut loops = Vec::new();
        for s in starts {
            if seen.contains(&s) {
                continue;
            }
            let mut lp = vec![s];
            seen.insert(s);
            let mut cur = next[&s];
            while cur != s {
                lp.push(cur);
                seen.insert(cur);
                cur = next[&cur];
            }
            loops.push(lp);
        }
        loops
    }
}
