//! Symmetry classes under the reflections `y -> -y` (R_xz) and `x -> -x` (R_yz),
//! orbit reduction of nodal unknowns and the exact class projector.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CsrMatrix, Mesh, ScalarField};
use crate::{Error, Result};

/// Character of the reflection group `{1, R_xz, R_yz, R_xz R_yz}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymmetryClass {
    /// Even under R_xz, odd under R_yz: the class of the coordinate `x`.
    #[serde(rename = "xz-inv-yz-anti")]
    XzInvYzAnti,
    #[serde(rename = "xz-inv-yz-inv")]
    XzInvYzInv,
    #[serde(rename = "xz-anti-yz-inv")]
    XzAntiYzInv,
    #[serde(rename = "xz-anti-yz-anti")]
    XzAntiYzAnti,
    /// No restriction.
    #[serde(rename = "all")]
    All,
}

impl SymmetryClass {
    pub const NAMES: [&'static str; 5] = ["xz-inv-yz-anti", "xz-inv-yz-inv", "xz-anti-yz-inv", "xz-anti-yz-anti", "all"];

    /// The four one-dimensional classes.
    pub const CHARACTERS: [SymmetryClass; 4] = [
        SymmetryClass::XzInvYzAnti,
        SymmetryClass::XzInvYzInv,
        SymmetryClass::XzAntiYzInv,
        SymmetryClass::XzAntiYzAnti,
    ];

    /// Signs `(chi(R_xz), chi(R_yz))`, or `None` for the unrestricted class.
    pub fn signs(self) -> Option<(f64, f64)> {
        match self {
            SymmetryClass::XzInvYzAnti => Some((1.0, -1.0)),
            SymmetryClass::XzInvYzInv => Some((1.0, 1.0)),
            SymmetryClass::XzAntiYzInv => Some((-1.0, 1.0)),
            SymmetryClass::XzAntiYzAnti => Some((-1.0, -1.0)),
            SymmetryClass::All => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SymmetryClass::XzInvYzAnti => Self::NAMES[0],
            SymmetryClass::XzInvYzInv => Self::NAMES[1],
            SymmetryClass::XzAntiYzInv => Self::NAMES[2],
            SymmetryClass::XzAntiYzAnti => Self::NAMES[3],
            SymmetryClass::All => Self::NAMES[4],
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SymmetryClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SymmetryClass::XzInvYzAnti,
            SymmetryClass::XzInvYzInv,
            SymmetryClass::XzAntiYzInv,
            SymmetryClass::XzAntiYzAnti,
            SymmetryClass::All,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

/// Orbits of the node set with their character signs.
fn orbit(mesh: &Mesh, i: usize, sx: f64, sy: f64) -> (Vec<(usize, f64)>, bool) {
    let images = [(i, 1.0), (mesh.rxz[i], sx), (mesh.ryz[i], sy), (mesh.ryz[mesh.rxz[i]], sx * sy)];
    let mut members: Vec<(usize, f64)> = Vec::with_capacity(4);
    let mut forced_zero = false;
    for (j, s) in images {
        match members.iter().find(|(k, _)| *k == j) {
            Some(&(_, t)) => {
                if t != s {
                    forced_zero = true;
                }
            }
            None => members.push((j, s)),
        }
    }
    (members, forced_zero)
}

/// Unknowns of a class-restricted problem, one per orbit representative.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub class: SymmetryClass,
    pub n_nodes: usize,
    /// Representative node of each unknown.
    pub reps: Vec<usize>,
    /// `(node, sign)` members of each unknown's basis vector.
    pub members: Vec<Vec<(usize, f64)>>,
}

impl Reduction {
    /// Reduction over the nodes accepted by `include`, which must be a union of orbits.
    pub fn new(mesh: &Mesh, class: SymmetryClass, include: impl Fn(usize) -> bool) -> Self {
        let n = mesh.nodes.len();
        let mut reps = Vec::new();
        let mut members = Vec::new();
        match class.signs() {
            None => {
                for i in (0..n).filter(|&i| include(i)) {
                    reps.push(i);
                    members.push(vec![(i, 1.0)]);
                }
            }
            Some((sx, sy)) => {
                let mut seen = vec![false; n];
                for i in 0..n {
                    if seen[i] || !include(i) {
                        continue;
                    }
                    let (orb, zero) = orbit(mesh, i, sx, sy);
                    orb.iter().for_each(|&(j, _)| seen[j] = true);
                    if !zero {
                        reps.push(i);
                        members.push(orb);
                    }
                }
            }
        }
        Reduction { class, n_nodes: n, reps, members }
    }

    /// Interior nodes only: the Dirichlet space of the class.
    pub fn interior(mesh: &Mesh, class: SymmetryClass) -> Self {
        Self::new(mesh, class, |i| !mesh.boundary_tag[i].is_boundary())
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    /// Values at the representatives.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.reps.iter().map(|&i| full[i]).collect()
    }

    /// Full field from reduced coefficients; nodes outside the reduction are zero.
    pub fn extend(&self, reduced: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes];
        self.extend_into(reduced, &mut out);
        out
    }

    /// Overwrite the reduced nodes of `full` with the expansion of `reduced`.
    pub fn extend_into(&self, reduced: &[f64], full: &mut [f64]) {
        for (k, orb) in self.members.iter().enumerate() {
            for &(j, s) in orb {
                full[j] = s * reduced[k];
            }
        }
    }

    /// The expansion matrix `E` whose columns are the signed orbit indicators.
    pub fn expansion(&self) -> CsrMatrix {
        let t: Vec<_> = self
            .members
            .iter()
            .enumerate()
            .flat_map(|(k, orb)| orb.iter().map(move |&(j, s)| (j, k, s)))
            .collect();
        CsrMatrix::from_triplets(self.n_nodes, self.len(), &t)
    }

    /// Galerkin reduction `E^T A E`, symmetric whenever `A` is.
    pub fn galerkin(&self, a: &CsrMatrix) -> CsrMatrix {
        let e = self.expansion();
        e.transpose().matmul(&a.matmul(&e))
    }

    /// Collocation at representatives: rows `rep` of `A E`.
    pub fn collocate(&self, a: &CsrMatrix) -> CsrMatrix {
        let e = self.expansion();
        let rows: Vec<(usize, usize, f64)> = self
            .reps
            .iter()
            .enumerate()
            .flat_map(|(k, &r)| a.row(r).map(move |(c, v)| (k, c, v)))
            .collect();
        CsrMatrix::from_triplets(self.len(), self.n_nodes, &rows).matmul(&e)
    }
}

/// Orthogonal projector onto the fields of a symmetry class.
#[derive(Clone, Debug)]
pub struct SymmetricProjector {
    pub class: SymmetryClass,
    orbits: Vec<(Vec<(usize, f64)>, bool)>,
}

/// Projector onto a class; the default class of the construction is
/// [`SymmetryClass::XzInvYzAnti`].
pub fn symmetric_projector(mesh: &Mesh, class: SymmetryClass) -> SymmetricProjector {
    let (sx, sy) = class.signs().unwrap_or((1.0, 1.0));
    let mut seen = vec![false; mesh.nodes.len()];
    let mut orbits = Vec::new();
    for i in 0..mesh.nodes.len() {
        if seen[i] {
            continue;
        }
        let (orb, zero) = if class == SymmetryClass::All { (vec![(i, 1.0)], false) } else { orbit(mesh, i, sx, sy) };
        orb.iter().for_each(|&(j, _)| seen[j] = true);
        orbits.push((orb, zero));
    }
    SymmetricProjector { class, orbits }
}

impl SymmetricProjector {
    /// Group average `(1/4) sum_g chi(g) g.u`, evaluated orbit by orbit so the
    /// output satisfies the mirror relations exactly.
    pub fn apply(&self, field: &ScalarField) -> ScalarField {
        let mut out = field.values.clone();
        for (orb, zero) in &self.orbits {
            if *zero {
                orb.iter().for_each(|&(j, _)| out[j] = 0.0);
                continue;
            }
            let avg = orb.iter().map(|&(j, s)| s * field.values[j]).sum::<f64>() / orb.len() as f64;
            for &(j, s) in orb {
                out[j] = s * avg;
            }
        }
        ScalarField { values: out }
    }
}
