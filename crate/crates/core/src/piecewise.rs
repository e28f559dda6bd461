//! Continuous 1-periodic piecewise polynomials on a mesh of `[0, 1]`, and the
//! (possibly discontinuous) interpolation projection onto degree `m - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nodes::{gauss_rule, make_nodes, representation_nodes, NodeFamily, NodeKind};
use crate::FORMAT_VERSION;

/// Breakpoints `0 = t_0 < t_1 < ... < t_L = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Mesh {
    breaks: Vec<f64>,
}

impl Mesh {
    pub fn new(breaks: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::InvalidArgument(
                "mesh needs at least one interval".into(),
            ));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
            return Err(Error::InvalidArgument(
                "mesh must start at 0 and end at 1".into(),
            ));
        }
        if !breaks.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "mesh breaks must be strictly increasing".into(),
            ));
        }
        Ok(Mesh { breaks })
    }

    /// `intervals` equal subintervals.
    pub fn uniform(intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::InvalidArgument(
                "mesh needs at least one interval".into(),
            ));
        }
        let mut breaks: Vec<f64> = (0..=intervals)
            .map(|i| i as f64 / intervals as f64)
            .collect();
        breaks[intervals] = 1.0;
        Ok(Mesh { breaks })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Number of intervals `L`.
    pub fn intervals(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn width(&self, i: usize) -> f64 {
        self.breaks[i + 1] - self.breaks[i]
    }

    /// Largest interval width `h`.
    pub fn max_width(&self) -> f64 {
        (0..self.intervals()).map(|i| self.width(i)).fold(0.0, f64::max)
    }

    /// Maps a local coordinate `x` in `[0, 1]` of interval `i` to global time.
    pub fn to_global(&self, i: usize, x: f64) -> f64 {
        self.breaks[i] + self.width(i) * x
    }

    /// Reduces `t` modulo one and returns `(interval, wrapped t)`. Intervals
    /// are half-open, `[t_{i-1}, t_i)`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let mut s = t - t.floor();
        if s >= 1.0 {
            s = 0.0;
        }
        let idx = self.breaks.partition_point(|&b| b <= s);
        (idx.saturating_sub(1).min(self.intervals() - 1), s)
    }
}

impl TryFrom<Vec<f64>> for Mesh {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Mesh::new(v)
    }
}

impl From<Mesh> for Vec<f64> {
    fn from(m: Mesh) -> Self {
        m.breaks
    }
}

/// Common interface of piecewise polynomials over a [`Mesh`].
pub trait Piecewise {
    fn mesh(&self) -> &Mesh;
    fn dim(&self) -> usize;
    /// Polynomial degree on each interval.
    fn local_degree(&self) -> usize;
    /// Evaluates the piece of interval `i` at local coordinate `x` in `[0, 1]`.
    fn eval_local_into(&self, i: usize, x: f64, out: &mut [f64]);

    /// Exact integral over `[a, b]` with `0 <= a <= b <= 1`.
    fn integrate(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        if !(a <= b) {
            return Err(Error::InvalidArgument(format!(
                "integration bounds out of order: {a} > {b}"
            )));
        }
        if a < 0.0 || b > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "integration bounds [{a}, {b}] outside [0, 1]"
            )));
        }
        let mesh = self.mesh();
        let (gx, gw) = gauss_rule(self.local_degree() + 1)?;
        let mut acc = vec![0.0; self.dim()];
        let mut val = vec![0.0; self.dim()];
        for i in 0..mesh.intervals() {
            let (lo, hi) = (mesh.breaks()[i].max(a), mesh.breaks()[i + 1].min(b));
            if hi <= lo {
                continue;
            }
            let h = mesh.width(i);
            let (x0, x1) = ((lo - mesh.breaks()[i]) / h, (hi - mesh.breaks()[i]) / h);
            let len = hi - lo;
            for (&x, &w) in gx.iter().zip(&gw) {
                self.eval_local_into(i, x0 + (x1 - x0) * x, &mut val);
                for (a, v) in acc.iter_mut().zip(&val) {
                    *a += w * len * v;
                }
            }
        }
        Ok(acc)
    }
}

/// Degree-`m` continuous 1-periodic piecewise polynomial, stored by its values
/// at the representation nodes of every interval.
///
/// Node `j = m` of interval `i` is node `0` of interval `i + 1` (and of
/// interval `0` for the last one), so those values share storage and the
/// polynomial is continuous and periodic by construction. The value at
/// `t = 0` doubles as the boundary value `y(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPiecewisePoly {
    mesh: Mesh,
    degree: usize,
    dim: usize,
    rep: NodeFamily,
    /// Layout `((i * degree + j) * dim + k)` for `j < degree`.
    values: Vec<f64>,
}

impl PeriodicPiecewisePoly {
    /// Number of stored reals for the given shape, `dim * degree * L`.
    pub fn storage_len(mesh: &Mesh, degree: usize, dim: usize) -> usize {
        dim * degree * mesh.intervals()
    }

    pub fn from_values(
        mesh: Mesh,
        degree: usize,
        dim: usize,
        rep_kind: NodeKind,
        values: Vec<f64>,
    ) -> Result<Self> {
        if degree == 0 || dim == 0 {
            return Err(Error::InvalidArgument(
                "piecewise polynomial needs degree >= 1 and dim >= 1".into(),
            ));
        }
        if values.len() != Self::storage_len(&mesh, degree, dim) {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                Self::storage_len(&mesh, degree, dim),
                values.len()
            )));
        }
        let rep = representation_nodes(rep_kind, degree)?;
        Ok(PeriodicPiecewisePoly {
            mesh,
            degree,
            dim,
            rep,
            values,
        })
    }

    /// Samples `f` at the representation nodes.
    pub fn from_fn<F>(mesh: Mesh, degree: usize, dim: usize, rep_kind: NodeKind, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> Vec<f64>,
    {
        let rep = representation_nodes(rep_kind, degree)?;
        let mut values = Vec::with_capacity(Self::storage_len(&mesh, degree, dim));
        for i in 0..mesh.intervals() {
            for j in 0..degree {
                let y = f(mesh.to_global(i, rep.nodes()[j]));
                if y.len() != dim {
                    return Err(Error::InvalidArgument(format!(
                        "function returned {} components, expected {dim}",
                        y.len()
                    )));
                }
                values.extend_from_slice(&y);
            }
        }
        Self::from_values(mesh, degree, dim, rep_kind, values)
    }

    /// Constant polynomial.
    pub fn constant(mesh: Mesh, degree: usize, rep_kind: NodeKind, c: &[f64]) -> Result<Self> {
        let c = c.to_vec();
        Self::from_fn(mesh, degree, c.len(), rep_kind, |_| c.clone())
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn rep_family(&self) -> &NodeFamily {
        &self.rep
    }

    pub fn rep_kind(&self) -> NodeKind {
        self.rep.kind()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Storage slot of representation node `j` (`0..=degree`) of interval `i`.
    pub fn node_slot(&self, i: usize, j: usize) -> usize {
        (i * self.degree + j) % (self.degree * self.mesh.intervals())
    }

    /// Stored value at representation node `j` of interval `i`.
    pub fn node_value(&self, i: usize, j: usize) -> &[f64] {
        let s = self.node_slot(i, j) * self.dim;
        &self.values[s..s + self.dim]
    }

    /// Global time of representation node `j` of interval `i`.
    pub fn rep_time(&self, i: usize, j: usize) -> f64 {
        self.mesh.to_global(i, self.rep.nodes()[j])
    }

    /// Lagrange weights on interval `i` for the wrapped time `s`, exact unit
    /// vectors at representation nodes.
    fn local_basis(&self, i: usize, s: f64, out: &mut [f64]) {
        if let Some(j) = (0..=self.degree).find(|&j| self.rep_time(i, j) == s) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[j] = 1.0;
            return;
        }
        let x = (s - self.mesh.breaks()[i]) / self.mesh.width(i);
        self.rep.basis_into(x, out);
    }

    fn combine(&self, i: usize, weights: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.node_value(i, j)) {
                *o += w * v;
            }
        }
    }

    /// Interval index and Lagrange weights of the representation values that
    /// determine `y(t)`; `y(t) = sum_j w_j * node_value(i, j)`.
    pub fn stencil(&self, t: f64) -> (usize, Vec<f64>) {
        let (i, s) = self.mesh.locate(t);
        let mut w = vec![0.0; self.degree + 1];
        self.local_basis(i, s, &mut w);
        (i, w)
    }

    /// Like [`stencil`](Self::stencil) but for the derivative `y'(t)`.
    pub fn deriv_stencil(&self, t: f64) -> (usize, Vec<f64>) {
        let (i, s) = self.mesh.locate(t);
        let mut w = vec![0.0; self.degree + 1];
        let x = (s - self.mesh.breaks()[i]) / self.mesh.width(i);
        self.rep.basis_deriv_into(x, &mut w);
        let h = self.mesh.width(i);
        w.iter_mut().for_each(|v| *v /= h);
        (i, w)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let (i, s) = self.mesh.locate(t);
        let mut w = vec![0.0; self.degree + 1];
        self.local_basis(i, s, &mut w);
        self.combine(i, &w, out);
    }

    /// Value at any real `t`, reduced modulo the period one.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    /// First component at `t`.
    pub fn eval_scalar(&self, t: f64) -> f64 {
        if self.dim == 1 {
            let mut out = [0.0];
            self.eval_into(t, &mut out);
            out[0]
        } else {
            self.eval(t)[0]
        }
    }

    /// Derivative at `t`. At a break the right-interval one-sided derivative
    /// is returned.
    pub fn eval_deriv(&self, t: f64) -> Vec<f64> {
        let (i, w) = self.deriv_stencil(t);
        let mut out = vec![0.0; self.dim];
        self.combine(i, &w, &mut out);
        out
    }

    /// Interpolates this polynomial onto a new mesh, degree and representation
    /// family.
    pub fn resample(&self, mesh: Mesh, degree: usize, rep_kind: NodeKind) -> Result<Self> {
        Self::from_fn(mesh, degree, self.dim, rep_kind, |t| self.eval(t))
    }

    pub fn to_document(&self) -> PolyDocument {
        let values = (0..self.mesh.intervals())
            .map(|i| {
                (0..=self.degree)
                    .map(|j| self.node_value(i, j).to_vec())
                    .collect()
            })
            .collect();
        PolyDocument {
            format_version: FORMAT_VERSION,
            breaks: self.mesh.breaks().to_vec(),
            degree: self.degree,
            dim: self.dim,
            rep_kind: self.rep.kind(),
            values,
        }
    }

    pub fn from_document(doc: &PolyDocument) -> Result<Self> {
        check_version(doc.format_version)?;
        let mesh = Mesh::new(doc.breaks.clone())?;
        let l = mesh.intervals();
        let (m, dim) = (doc.degree, doc.dim);
        if doc.values.len() != l
            || doc
                .values
                .iter()
                .any(|iv| iv.len() != m + 1 || iv.iter().any(|v| v.len() != dim))
        {
            return Err(Error::InvalidArgument(
                "values array does not match breaks/degree/dim".into(),
            ));
        }
        for i in 0..l {
            let next = &doc.values[(i + 1) % l][0];
            if doc.values[i][m]
                .iter()
                .zip(next)
                .any(|(a, b)| a.to_bits() != b.to_bits())
            {
                return Err(Error::InvalidArgument(format!(
                    "values are not continuous at the right end of interval {i}"
                )));
            }
        }
        let values = doc
            .values
            .iter()
            .flat_map(|iv| iv[..m].iter().flatten().copied())
            .collect();
        Self::from_values(mesh, m, dim, doc.rep_kind, values)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }
}

impl Piecewise for PeriodicPiecewisePoly {
    fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn local_degree(&self) -> usize {
        self.degree
    }

    fn eval_local_into(&self, i: usize, x: f64, out: &mut [f64]) {
        let w = self.rep.basis(x);
        self.combine(i, &w, out);
    }
}

/// JSON form of a [`PeriodicPiecewisePoly`]; `values[i][j][k]` is component
/// `k` at representation node `j` (endpoints included) of interval `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyDocument {
    pub format_version: u32,
    pub breaks: Vec<f64>,
    pub degree: usize,
    pub dim: usize,
    pub rep_kind: NodeKind,
    pub values: Vec<Vec<Vec<f64>>>,
}

pub(crate) fn check_version(found: u32) -> Result<()> {
    if found > FORMAT_VERSION || found == 0 {
        return Err(Error::UnsupportedVersion {
            found,
            supported: FORMAT_VERSION,
        });
    }
    Ok(())
}

/// Piecewise polynomial of degree `m - 1` fixed by its values at the `m`
/// collocation nodes of every interval. No continuity across breaks.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseProjection {
    mesh: Mesh,
    dim: usize,
    family: NodeFamily,
    /// Layout `((i * m + j) * dim + k)`.
    values: Vec<f64>,
}

impl PiecewiseProjection {
    pub fn family(&self) -> &NodeFamily {
        &self.family
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Collocation time `t_{i,j}`.
    pub fn node_time(&self, i: usize, j: usize) -> f64 {
        self.mesh.to_global(i, self.family.nodes()[j])
    }

    pub fn node_value(&self, i: usize, j: usize) -> &[f64] {
        let s = (i * self.family.len() + j) * self.dim;
        &self.values[s..s + self.dim]
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let (i, s) = self.mesh.locate(t);
        let mut out = vec![0.0; self.dim];
        if let Some(j) = (0..self.family.len()).find(|&j| self.node_time(i, j) == s) {
            out.copy_from_slice(self.node_value(i, j));
            return out;
        }
        let x = (s - self.mesh.breaks()[i]) / self.mesh.width(i);
        self.eval_local_into(i, x, &mut out);
        out
    }
}

impl Piecewise for PiecewiseProjection {
    fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn local_degree(&self) -> usize {
        self.family.len() - 1
    }

    fn eval_local_into(&self, i: usize, x: f64, out: &mut [f64]) {
        let w = self.family.basis(x);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &wj) in w.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.node_value(i, j)) {
                *o += wj * v;
            }
        }
    }
}

/// Interpolation projection `P_m f`: samples `f` at the `m` collocation nodes
/// of every interval.
pub fn project<F>(f: F, mesh: &Mesh, m: usize, kind: NodeKind) -> Result<PiecewiseProjection>
where
    F: FnMut(f64) -> Vec<f64>,
{
    let mut f = f;
    try_project(|t| Ok(f(t)), mesh, m, kind)
}

/// Fallible variant of [`project`].
pub fn try_project<F>(mut f: F, mesh: &Mesh, m: usize, kind: NodeKind) -> Result<PiecewiseProjection>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let family = make_nodes(kind, m)?;
    let mut values = Vec::with_capacity(mesh.intervals() * family.len());
    let mut dim = None;
    for i in 0..mesh.intervals() {
        for &x in family.nodes() {
            let y = f(mesh.to_global(i, x))?;
            match dim {
                None => dim = Some(y.len()),
                Some(d) if d != y.len() => {
                    return Err(Error::InvalidArgument(
                        "projected function changed its output dimension".into(),
                    ))
                }
                _ => {}
            }
            values.extend_from_slice(&y);
        }
    }
    let dim = dim.unwrap_or(0);
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "projected function has no components".into(),
        ));
    }
    Ok(PiecewiseProjection {
        mesh: mesh.clone(),
        dim,
        family,
        values,
    })
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn integral_is_additive_at_breaks(
            coeffs in proptest::collection::vec(-2.0f64..2.0, 4 * 7),
            split in 0.0f64..1.0,
        ) {
            let mesh = Mesh::new(vec![0.0, 0.3, 0.55, 0.8, 1.0]).unwrap();
            let p = project(
                |t| {
                    let (i, s) = mesh.locate(t);
                    let c = &coeffs[i * 7..(i + 1) * 7];
                    vec![c.iter().rev().fold(0.0, |a, c| a * s + c)]
                },
                &mesh,
                7,
                NodeKind::GaussLegendre,
            ).unwrap();
            let whole = p.integrate(0.0, 1.0).unwrap()[0];
            for b in [0.3, 0.55, 0.8, split] {
                let left = p.integrate(0.0, b).unwrap()[0];
                let right = p.integrate(b, 1.0).unwrap()[0];
                prop_assert!((left + right - whole).abs() <= 1e-13);
            }
        }

        #[test]
        fn json_round_trip_is_bit_exact(
            vals in proptest::collection::vec(-1e6f64..1e6, 2 * 4 * 3),
        ) {
            let p = PeriodicPiecewisePoly::from_values(
                Mesh::new(vec![0.0, 0.1, 0.7, 1.0]).unwrap(),
                4, 2, NodeKind::ChebyshevLobatto, vals,
            ).unwrap();
            let back = PeriodicPiecewisePoly::from_json(&p.to_json().unwrap()).unwrap();
            prop_assert_eq!(
                back.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                p.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
