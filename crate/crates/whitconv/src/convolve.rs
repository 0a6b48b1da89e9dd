//! Product-formula kernel q(x, y, ξ), the index Whittaker translation,
//! convolution of finite measures and the ⊕_U sampling primitive.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{gk21, integrate_breaks, pairwise_sum, QuadConfig};
use crate::specfun::{parabolic_cylinder_d_scaled, Params, ScaledPcfTable};
use crate::spectral::{ln_m_weight, DiscreteMeasure, GridDensity, Measure};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// |f(x)| ≤ b₁ exp(1/(2x²) + b₂(x^{−β} + x^β)), β < 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEnvelope {
    pub b1: f64,
    pub b2: f64,
    pub beta: f64,
}

impl GrowthEnvelope {
    pub fn new(b1: f64, b2: f64, beta: f64) -> Result<Self> {
        if !(b1 >= 0.0 && b2 >= 0.0 && (0.0..2.0).contains(&beta)) {
            return Err(Error::InvalidParam(format!("growth envelope needs b1, b2 >= 0 and 0 <= beta < 2 (got {b1}, {b2}, {beta})")));
        }
        Ok(GrowthEnvelope { b1, b2, beta })
    }

    /// Envelope of bounded functions: |f| ≤ b₁.
    pub fn bounded(b1: f64) -> Self {
        GrowthEnvelope { b1, b2: 0.0, beta: 0.0 }
    }

    pub fn bound(&self, x: f64) -> f64 {
        self.b1 * (0.5 / (x * x) + self.b2 * (x.powf(-self.beta) + x.powf(self.beta))).exp()
    }

    /// Spot check on a log grid of [1e−2, 1e2]; returns the sampled points
    /// where |f| exceeds the envelope.
    pub fn violations(&self, f: &dyn Fn(f64) -> f64) -> Vec<f64> {
        (0..=64)
            .map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 64.0))
            .filter(|&x| f(x).abs() > self.bound(x) * (1.0 + 1e-12))
            .collect()
    }
}

/// The product-formula kernel for fixed α, with a tabulated D̃_{2α}.
#[derive(Debug, Clone)]
pub struct QKernel {
    p: Params,
    table: Arc<ScaledPcfTable>,
}

impl QKernel {
    pub fn new(p: &Params) -> Result<Self> {
        Ok(QKernel { p: *p, table: Arc::new(ScaledPcfTable::new(2.0 * p.alpha)?) })
    }

    pub fn params(&self) -> &Params {
        &self.p
    }

    /// log q(x, y, ξ) for positive arguments.
    pub fn ln_q(&self, x: f64, y: f64, xi: f64) -> f64 {
        let prod = x * y * xi;
        let t = (x * x + y * y + xi * xi) / (2.0 * prod);
        // Σ 1/(2x_i²) − t²/2 = 16A²/(8(xyξ)²), with 16A² in Heron's factored form
        let heron = (x + y + xi) * (-x + y + xi) * (x - y + xi) * (x + y - xi);
        let e = heron / (8.0 * prod * prod);
        -LN_SQRT_2PI + (2.0 * self.p.alpha - 1.0) * prod.ln() + e + self.table.eval(t).ln()
    }

    pub fn q(&self, x: f64, y: f64, xi: f64) -> f64 {
        self.ln_q(x, y, xi).exp()
    }

    /// log of ξ ↦ q(x, y, ξ) m(ξ).
    fn ln_qm(&self, x: f64, y: f64, xi: f64) -> f64 {
        self.ln_q(x, y, xi) + ln_m_weight(&self.p, xi)
    }

    /// Breakpoints covering the mass of q(x, y, ·) m: the triangle range
    /// [|x−y|, x+y] plus geometric extensions until the log-density has
    /// fallen by 60 below its peak.
    pub fn support_breaks(&self, x: f64, y: f64) -> Vec<f64> {
        let lo0 = (x - y).abs();
        let hi0 = x + y;
        let peak = {
            let mut best = f64::NEG_INFINITY;
            for i in 1..64 {
                let xi = lo0 + (hi0 - lo0) * i as f64 / 64.0;
                best = best.max(self.ln_qm(x, y, xi));
            }
            best
        };
        let mut lo = if lo0 > 0.0 { lo0 } else { hi0 * 1e-2 };
        while lo > 1e-6 * hi0 && self.ln_qm(x, y, lo) > peak - 60.0 {
            lo *= 0.8;
        }
        let mut hi = hi0;
        while self.ln_qm(x, y, hi) > peak - 60.0 {
            hi *= 1.25;
        }
        let mut b = Vec::new();
        // a few geometric panels below the triangle range
        if lo < lo0 {
            let n = 8;
            for i in 0..n {
                b.push(lo * (lo0 / lo).powf(i as f64 / n as f64));
            }
        } else {
            b.push(lo);
        }
        let n = 32;
        for i in 0..=n {
            let v = lo0 + (hi0 - lo0) * i as f64 / n as f64;
            if v > *b.last().unwrap() {
                b.push(v);
            }
        }
        let n = 16;
        for i in 1..=n {
            b.push(hi0 * (hi / hi0).powf(i as f64 / n as f64));
        }
        b.dedup();
        b
    }

    /// ∫ g(ξ) q(x, y, ξ) m(ξ) dξ for x, y > 0.
    pub fn integrate(&self, x: f64, y: f64, mut g: impl FnMut(f64) -> f64, cfg: &QuadConfig) -> Result<f64> {
        let breaks = self.support_breaks(x, y);
        let r = integrate_breaks(
            |xi: f64| {
                let v = g(xi);
                if v == 0.0 {
                    0.0
                } else {
                    v * self.ln_qm(x, y, xi).exp()
                }
            },
            &breaks,
            cfg,
        )?;
        Ok(r.value)
    }
}

/// q(x, y, ξ) evaluated directly (no table).
pub fn q_kernel(p: &Params, x: f64, y: f64, xi: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0 && xi > 0.0) {
        return Err(Error::Domain(format!("q_kernel needs positive arguments, got ({x}, {y}, {xi})")));
    }
    let prod = x * y * xi;
    let t = (x * x + y * y + xi * xi) / (2.0 * prod);
    let heron = (x + y + xi) * (-x + y + xi) * (x - y + xi) * (x + y - xi);
    let d = parabolic_cylinder_d_scaled(2.0 * p.alpha, t)?;
    Ok((-LN_SQRT_2PI + (2.0 * p.alpha - 1.0) * prod.ln() + heron / (8.0 * prod * prod)).exp() * d)
}

/// Right-hand side of the kernel bound
/// C/(xyξ) (x²+y²+ξ²)^{2α} exp(1/(4x²) + 1/(4ξ²) − y²/(8x²ξ²) − (x²−ξ²)²/(8x²y²ξ²)).
pub fn q_kernel_bound(p: &Params, c: f64, x: f64, y: f64, xi: f64) -> f64 {
    let (x2, y2, z2) = (x * x, y * y, xi * xi);
    let e = 0.25 / x2 + 0.25 / z2 - y2 / (8.0 * x2 * z2) - (x2 - z2).powi(2) / (8.0 * x2 * y2 * z2);
    c / (x * y * xi) * (x2 + y2 + z2).powf(2.0 * p.alpha) * e.exp()
}

/// (𝒯^y f)(x) = ∫ f(ξ) q(x, y, ξ) m(ξ) dξ, with (𝒯^0 f)(x) = (𝒯^x f)(0) = f(x).
pub fn translate(
    k: &QKernel,
    f: &dyn Fn(f64) -> f64,
    envelope: &GrowthEnvelope,
    y: f64,
    x: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::Domain(format!("translate needs x, y >= 0, got ({x}, {y})")));
    }
    if y == 0.0 {
        return Ok(f(x));
    }
    if x == 0.0 {
        return Ok(f(y));
    }
    let bad = envelope.violations(f);
    if !bad.is_empty() {
        log::warn!("function exceeds its growth envelope at {} sampled points (first at {})", bad.len(), bad[0]);
    }
    k.integrate(x, y, f, cfg)
        .map_err(|e| if bad.is_empty() { e } else { Error::Domain(format!("envelope violated and translation failed: {e}")) })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub scale: f64,
    pub pass: bool,
}

/// Compares ∫(𝒯^y f) g m with ∫ f (𝒯^y g) m for functions supported in `support`.
pub fn translate_symmetry_check(
    k: &QKernel,
    f: &(dyn Fn(f64) -> f64 + Sync),
    g: &(dyn Fn(f64) -> f64 + Sync),
    support: (f64, f64),
    y: f64,
) -> Result<SymmetryReport> {
    let inner = QuadConfig { abs_tol: 1e-13, rel_tol: 1e-11, ..QuadConfig::default() };
    let outer = QuadConfig { abs_tol: 1e-12, rel_tol: 1e-10, ..QuadConfig::default() };
    let p = *k.params();
    let env = GrowthEnvelope::bounded(f64::INFINITY);
    let side = |a: &(dyn Fn(f64) -> f64 + Sync), b: &(dyn Fn(f64) -> f64 + Sync)| -> Result<(f64, f64)> {
        let mut failure = None;
        let mut scale = 0.0;
        let r = integrate_breaks(
            |x: f64| {
                let bx = b(x);
                if bx == 0.0 {
                    return 0.0;
                }
                match translate(k, a, &env, y, x, &inner) {
                    Ok(t) => {
                        let v = t * bx * ln_m_weight(&p, x).exp();
                        scale += v.abs();
                        v
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            &subdivide(support, 8),
            &outer,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok((r.value, r.absval.max(scale)))
    };
    let (lhs, s1) = side(f, g)?;
    let (rhs, s2) = side(g, f)?;
    let scale = s1.max(s2).max(1e-300);
    let gap = (lhs - rhs).abs();
    Ok(SymmetryReport { lhs, rhs, gap, scale, pass: gap <= 1e-6 * scale })
}

fn subdivide((a, b): (f64, f64), n: usize) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Geometric grid of `n` points covering the mass of δ_x * δ_y.
pub fn default_grid(k: &QKernel, x: f64, y: f64, n: usize) -> Vec<f64> {
    let b = k.support_breaks(x, y);
    let (lo, hi) = (b[0].max(1e-8), *b.last().unwrap());
    geometric_grid(lo, hi, n)
}

pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Minimum mass a convolution grid must hold.
pub const COVERAGE_MIN: f64 = 1.0 - 1e-4;

/// δ_x * δ_y: density q(x, y, ·) against m on `out_grid`; if either point
/// is 0 the result is the other point mass.
pub fn convolve_point_masses(k: &QKernel, x: f64, y: f64, out_grid: Option<&[f64]>) -> Result<Measure> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::Domain(format!("point masses need x, y >= 0, got ({x}, {y})")));
    }
    if x == 0.0 || y == 0.0 {
        return Ok(Measure::Discrete(DiscreteMeasure::dirac(x + y)?));
    }
    let grid = match out_grid {
        Some(g) => g.to_vec(),
        None => default_grid(k, x, y, 400),
    };
    let g = GridDensity::from_fn(grid, |xi| Ok(k.q(x, y, xi)), 0.0)?;
    let mass = g.mass(k.params())?;
    if mass < COVERAGE_MIN {
        return Err(Error::Coverage(format!("grid holds mass {mass} of delta_{x} * delta_{y}")));
    }
    Ok(Measure::Density(g))
}

/// Default cap on the number of atom pairs in a convolution.
pub const MAX_ATOM_PAIRS: usize = 10_000;

/// A measure with a density part (against m) and point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedMeasure {
    pub density: Option<GridDensity>,
    pub atoms: Vec<(f64, f64)>,
}

impl MixedMeasure {
    pub fn mass(&self, p: &Params) -> Result<f64> {
        let d = match &self.density {
            Some(g) => g.mass(p)?,
            None => 0.0,
        };
        Ok(d + pairwise_sum(&self.atoms.iter().map(|a| a.1).collect::<Vec<_>>()))
    }

    /// Collapse to a `Measure` when one part is empty.
    pub fn into_measure(self) -> Result<Measure> {
        match (self.density, self.atoms.is_empty()) {
            (None, _) => Ok(Measure::Discrete(DiscreteMeasure::new(self.atoms)?)),
            (Some(g), true) => Ok(Measure::Density(g)),
            (Some(mut g), false) => {
                if self.atoms.iter().all(|a| a.0 == 0.0) {
                    g.atom_at_zero += self.atoms.iter().map(|a| a.1).sum::<f64>();
                    Ok(Measure::Density(g))
                } else {
                    Err(Error::InvalidParam("measure has both a density and atoms away from 0".into()))
                }
            }
        }
    }
}

/// Convolution of two finite measures. Atom pairs give mixtures of
/// point-mass convolutions; density parts are integrated against the
/// kernel with trapezoid weights on their grids. The output density lives
/// on `out_grid` (default: geometric grid from the inputs' ranges).
pub fn convolve_measures(
    k: &QKernel,
    mu: &Measure,
    nu: &Measure,
    out_grid: Option<&[f64]>,
    max_pairs: usize,
) -> Result<MixedMeasure> {
    let p = *k.params();
    let (ma, da) = split(mu);
    let (mb, db) = split(nu);
    let na = nodes(&p, &ma, da.as_ref());
    let nb = nodes(&p, &mb, db.as_ref());
    if na.len().saturating_mul(nb.len()) > max_pairs {
        return Err(Error::CostCap(format!(
            "{} x {} node pairs exceed the cap of {max_pairs}",
            na.len(),
            nb.len()
        )));
    }
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    let mut pairs: Vec<(f64, f64, f64)> = Vec::new();
    for a in &na {
        for b in &nb {
            if a.x == 0.0 || b.x == 0.0 {
                // δ₀ is the identity: atoms stay atoms, density nodes go back to the density part
                if a.atom && b.atom {
                    atoms.push((a.x + b.x, a.w * b.w));
                }
            } else {
                pairs.push((a.x, b.x, a.w * b.w));
            }
        }
    }
    let mut dens_parts: Vec<(GridDensity, f64)> = Vec::new();
    let zero_a: f64 = ma.atoms.iter().filter(|t| t.x == 0.0).map(|t| t.w).sum();
    let zero_b: f64 = mb.atoms.iter().filter(|t| t.x == 0.0).map(|t| t.w).sum();
    if let (Some(g), true) = (&db, zero_a > 0.0) {
        dens_parts.push((g.clone(), zero_a));
    }
    if let (Some(g), true) = (&da, zero_b > 0.0) {
        dens_parts.push((g.clone(), zero_b));
    }
    if pairs.is_empty() && dens_parts.is_empty() {
        return Ok(MixedMeasure { density: None, atoms: merge(atoms) });
    }
    let grid: Vec<f64> = match out_grid {
        Some(g) => g.to_vec(),
        None => {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for &(x, y, _) in &pairs {
                let b = k.support_breaks(x, y);
                lo = lo.min(b[0]);
                hi = hi.max(*b.last().unwrap());
            }
            for (g, _) in &dens_parts {
                lo = lo.min(g.grid[0]);
                hi = hi.max(*g.grid.last().unwrap());
            }
            geometric_grid(lo.max(1e-8), hi, 400)
        }
    };
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&xi| {
            let mut terms: Vec<f64> = pairs.iter().map(|&(x, y, w)| w * k.q(x, y, xi)).collect();
            for (g, w) in &dens_parts {
                terms.push(w * g.density(xi));
            }
            pairwise_sum(&terms)
        })
        .collect();
    let density = GridDensity::new(grid, values, 0.0)?;
    Ok(MixedMeasure { density: Some(density), atoms: merge(atoms) })
}

fn split(m: &Measure) -> (DiscreteMeasure, Option<GridDensity>) {
    match m {
        Measure::Discrete(d) => (d.clone(), None),
        Measure::Density(g) => {
            let atoms = if g.atom_at_zero > 0.0 { vec![(0.0, g.atom_at_zero)] } else { vec![] };
            let mut g2 = g.clone();
            g2.atom_at_zero = 0.0;
            (DiscreteMeasure::new(atoms).expect("valid atom"), Some(g2))
        }
    }
}

struct Node {
    x: f64,
    w: f64,
    atom: bool,
}

/// Quadrature nodes: atoms keep their weights, densities contribute
/// trapezoid weights times density times m.
fn nodes(p: &Params, atoms: &DiscreteMeasure, dens: Option<&GridDensity>) -> Vec<Node> {
    let mut out: Vec<Node> = atoms.atoms.iter().map(|a| Node { x: a.x, w: a.w, atom: true }).collect();
    if let Some(g) = dens {
        let n = g.grid.len();
        for i in 0..n {
            let left = if i > 0 { g.grid[i] - g.grid[i - 1] } else { 0.0 };
            let right = if i + 1 < n { g.grid[i + 1] - g.grid[i] } else { 0.0 };
            let w = 0.5 * (left + right) * g.values[i] * ln_m_weight(p, g.grid[i]).exp();
            if w > 0.0 && g.grid[i] > 0.0 {
                out.push(Node { x: g.grid[i], w, atom: false });
            }
        }
    }
    out
}

fn merge(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (x, w) in atoms {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

/// CDF of δ_x * δ_y at z.
pub fn conv_cdf(k: &QKernel, x: f64, y: f64, z: f64, cfg: &QuadConfig) -> Result<f64> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::Domain(format!("conv_cdf needs x, y >= 0, got ({x}, {y})")));
    }
    if x == 0.0 || y == 0.0 {
        return Ok(if z >= x + y { 1.0 } else { 0.0 });
    }
    if z <= 0.0 {
        return Ok(0.0);
    }
    let b: Vec<f64> = k.support_breaks(x, y).into_iter().filter(|&v| v < z).chain(std::iter::once(z)).collect();
    if b.len() < 2 {
        return Ok(0.0);
    }
    let r = integrate_breaks(|xi: f64| k.ln_qm(x, y, xi).exp(), &b, cfg)?;
    Ok(r.value.clamp(0.0, 1.0))
}

/// Panel-wise CDF of δ_x * δ_y, for repeated inversion.
#[derive(Debug, Clone)]
pub struct ConvCdf {
    x: f64,
    y: f64,
    breaks: Vec<f64>,
    cum: Vec<f64>,
}

impl ConvCdf {
    pub fn new(k: &QKernel, x: f64, y: f64) -> Result<Self> {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::Domain(format!("ConvCdf needs x, y > 0, got ({x}, {y})")));
        }
        let coarse = k.support_breaks(x, y);
        // refine each panel four times for sharper bracketing
        let mut breaks = vec![coarse[0]];
        for w in coarse.windows(2) {
            for j in 1..=4 {
                breaks.push(w[0] + (w[1] - w[0]) * j as f64 / 4.0);
            }
        }
        let mut cum = vec![0.0];
        let mut acc = 0.0;
        for w in breaks.windows(2) {
            let (v, _, _) = gk21(&mut |xi: f64| k.ln_qm(x, y, xi).exp(), w[0], w[1]);
            acc += v;
            cum.push(acc);
        }
        Ok(ConvCdf { x, y, breaks, cum })
    }

    pub fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Inverse CDF at u by panel search then bisection to `ztol`.
    pub fn quantile(&self, k: &QKernel, u: f64, ztol: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("u must lie in (0, 1), got {u}")));
        }
        let target = u * self.total();
        let i = self.cum.partition_point(|&c| c < target);
        if i == 0 || i >= self.cum.len() {
            return Err(Error::Bracket(format!("quantile {u} not bracketed for ({}, {})", self.x, self.y)));
        }
        let (mut a, mut b) = (self.breaks[i - 1], self.breaks[i]);
        let base = self.cum[i - 1];
        let (x, y) = (self.x, self.y);
        let left = self.breaks[i - 1];
        while b - a > ztol * b.max(1e-300) {
            let mid = 0.5 * (a + b);
            let (v, _, _) = gk21(&mut |xi: f64| k.ln_qm(x, y, xi).exp(), left, mid);
            if base + v < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// x ⊕_u y = sup{z : (𝒯^y 𝟙_{[0,z]})(x) < u}.
pub fn oplus_sample(k: &QKernel, x: f64, y: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("u must lie in (0, 1), got {u}")));
    }
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::Domain(format!("oplus needs x, y >= 0, got ({x}, {y})")));
    }
    if x == 0.0 || y == 0.0 {
        return Ok(x + y);
    }
    ConvCdf::new(k, x, y)?.quantile(k, u, 1e-10)
}

/// ∫ q(x, y, ξ) m(ξ) dξ, which should be 1.
pub fn kernel_mass(k: &QKernel, x: f64, y: f64, cfg: &QuadConfig) -> Result<f64> {
    k.integrate(x, y, |_| 1.0, cfg)
}
