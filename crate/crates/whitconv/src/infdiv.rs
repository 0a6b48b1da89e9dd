//! Infinitely divisible laws: compound Poisson measures, exponents ψ,
//! the semigroups μ_t with μ̂_t = e^{−tψ}, and the Gaussian criterion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convolve::{convolve_measures, geometric_grid, translate, GrowthEnvelope, MixedMeasure, QKernel};
use crate::error::{Error, Result};
use crate::processes::diffusion_law;
use crate::quad::QuadConfig;
use crate::specfun::{bw_lambda, Params};
use crate::spectral::{
    forward_transform, inverse_transform_detailed, Atom, DiscreteMeasure, GridDensity, Measure, SpectralPoint,
};

/// ψ(λ) = bλ + Σ w_i (1 − 𝑾_λ(x_i)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFn {
    pub gaussian_coef: f64,
    pub levy: Vec<Atom>,
}

impl ExponentFn {
    pub fn new(gaussian_coef: f64, levy: &DiscreteMeasure) -> Result<Self> {
        if !(gaussian_coef >= 0.0 && gaussian_coef.is_finite()) {
            return Err(Error::InvalidParam(format!("gaussian coefficient must be >= 0, got {gaussian_coef}")));
        }
        if levy.atoms.iter().any(|a| a.x <= 0.0) {
            return Err(Error::InvalidParam("Lévy measure must live on (0, ∞)".into()));
        }
        Ok(ExponentFn { gaussian_coef, levy: levy.atoms.clone() })
    }

    /// ψ(λ) = bλ.
    pub fn gaussian(b: f64) -> Result<Self> {
        Self::new(b, &DiscreteMeasure { atoms: vec![] })
    }

    /// ψ(λ) = a(1 − μ̂(λ)) for a probability measure μ on (0, ∞).
    pub fn compound_poisson(a: f64, mu: &DiscreteMeasure) -> Result<Self> {
        if !(a > 0.0) || !mu.is_probability() {
            return Err(Error::InvalidParam("compound Poisson needs a > 0 and a probability measure".into()));
        }
        Self::new(0.0, &mu.scaled(a)?)
    }

    pub fn levy_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure { atoms: self.levy.clone() }
    }

    pub fn levy_mass(&self) -> f64 {
        self.levy.iter().map(|a| a.w).sum()
    }

    pub fn is_pure_compound_poisson(&self) -> bool {
        self.gaussian_coef == 0.0 && !self.levy.is_empty()
    }

    pub fn eval(&self, p: &Params, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("exponent needs lambda >= 0, got {lambda}")));
        }
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let mut s = self.gaussian_coef * lambda;
        for a in &self.levy {
            s += a.w * (1.0 - bw_lambda(p, lambda, a.x)?);
        }
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: ExponentFn = serde_json::from_str(s)?;
        Self::new(e.gaussian_coef, &DiscreteMeasure::new(e.levy.iter().map(|a| (a.x, a.w)))?)
    }
}

/// Forward Lévy-Khintchine builder.
pub fn build_exponent(gaussian_coef: f64, levy: &DiscreteMeasure) -> Result<ExponentFn> {
    ExponentFn::new(gaussian_coef, levy)
}

/// exp(a(μ̂(λ) − 1)).
pub fn compound_poisson_transform(p: &Params, a: f64, mu: &DiscreteMeasure, lambda: f64) -> Result<f64> {
    let muhat = mu.integrate(|x| bw_lambda(p, lambda, x))?;
    Ok((a * (muhat - 1.0)).exp())
}

/// Σ_{k≤K} e^{−a} a^k/k! μ̂(λ)^k.
pub fn compound_poisson_series(p: &Params, a: f64, mu: &DiscreteMeasure, lambda: f64, k_max: usize) -> Result<f64> {
    let muhat = mu.integrate(|x| bw_lambda(p, lambda, x))?;
    let mut term = (-a).exp();
    let mut sum = term;
    for k in 1..=k_max {
        term *= a * muhat / k as f64;
        sum += term;
    }
    Ok(sum)
}

/// max ψ(λ)/(1+λ) over an even grid of [0, λ_max].
pub fn linear_growth_constant(p: &Params, psi: &ExponentFn, lambda_max: f64, n: usize) -> Result<f64> {
    let vals: Vec<f64> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let l = lambda_max * i as f64 / n as f64;
            Ok(psi.eval(p, l)? / (1.0 + l))
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Default grid for semigroup densities.
pub fn default_semigroup_grid(t: f64) -> Vec<f64> {
    let hi = 8.0 * (1.0 + t).powf(1.5) + 4.0;
    geometric_grid(0.02, hi, 480)
}

/// Density of μ_t against m by inverting e^{−tψ}. A pure compound Poisson
/// exponent leaves an atom at 0 that no density can carry; that case is
/// reported as an error (see `compound_poisson_law`).
pub fn semigroup_density(
    p: &Params,
    psi: &ExponentFn,
    t: f64,
    out_grid: Option<&[f64]>,
    cfg: &QuadConfig,
) -> Result<GridDensity> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("semigroup time must be > 0, got {t}")));
    }
    if psi.gaussian_coef == 0.0 {
        let atom = (-t * psi.levy_mass()).exp();
        return Err(Error::TailEstimate(format!(
            "e^(-t psi) tends to {atom:e} as lambda grows: mu_t has an atom at 0 of at least that weight and no inversion exists"
        )));
    }
    let grid = match out_grid {
        Some(g) => g.to_vec(),
        None => default_semigroup_grid(t * psi.gaussian_coef.max(1e-3)),
    };
    let vals = inverse_transform_detailed(p, |l| Ok((-t * psi.eval(p, l)?).exp()), &grid, cfg)?;
    let peak = vals.iter().fold(0.0f64, |a, v| a.max(v.value.abs()));
    let worst = vals.iter().fold(0.0f64, |a, v| a.max(v.absval));
    // cancellation check: rounding error of the τ-integral against the density scale
    if 64.0 * f64::EPSILON * worst > 1e-6 * peak {
        return Err(Error::Instability(format!(
            "inversion of e^(-t psi) at t = {t} cancels {:.1e}-fold; use the diffusion PDE law for small t",
            worst / peak.max(1e-300)
        )));
    }
    let g = GridDensity::new(grid, vals.iter().map(|v| v.value.max(0.0)).collect(), 0.0)?;
    // a caller's grid may cover only part of the law on purpose
    let mass = if out_grid.is_none() { g.mass(p)? } else { 1.0 };
    if (mass - 1.0).abs() > 1e-3 {
        return Err(Error::Coverage(format!("semigroup density at t = {t} holds mass {mass}")));
    }
    Ok(g)
}

/// Law of the diffusion started at 0 after time t, as a density against m
/// on `out_grid`; the small-t companion of `semigroup_density` for ψ = λ.
pub fn diffusion_law_density(p: &Params, t: f64, out_grid: Option<&[f64]>) -> Result<GridDensity> {
    let law = diffusion_law(p, t, 0.0)?;
    let grid = match out_grid {
        Some(g) => g.to_vec(),
        None => {
            let hi = 8.0 * (1.0 + t).powf(1.5) + 4.0;
            geometric_grid(1e-3, hi, 480)
        }
    };
    GridDensity::from_fn(grid, |y| law.density_m(p, y), 0.0)
}

/// μ_t = e^{−at} Σ_k (at)^k/k! μ^{*k} for ψ = a(1 − μ̂). The δ₀ term stays an
/// atom; higher powers are densities on `out_grid`.
pub fn compound_poisson_law(
    k: &QKernel,
    psi: &ExponentFn,
    t: f64,
    out_grid: Option<&[f64]>,
) -> Result<MixedMeasure> {
    if !psi.is_pure_compound_poisson() {
        return Err(Error::InvalidParam("compound_poisson_law needs a pure compound Poisson exponent".into()));
    }
    let a = psi.levy_mass();
    let mu = DiscreteMeasure::new(psi.levy.iter().map(|x| (x.x, x.w / a)))?;
    let at = a * t;
    let kmax = (at + 10.0 * at.sqrt() + 12.0).ceil() as usize;
    let xmax = mu.atoms.last().unwrap().x;
    let xmin = mu.atoms[0].x;
    let grid = match out_grid {
        Some(g) => g.to_vec(),
        None => {
            let lo = k.support_breaks(xmin, xmin)[0];
            let hi = *k.support_breaks(xmax * (kmax.max(2) - 1) as f64, xmax).last().unwrap();
            geometric_grid(lo.max(1e-6), hi, 400)
        }
    };
    let mut weight = (-at).exp();
    let mut atoms = vec![(0.0, weight)];
    weight *= at;
    for x in &mu.atoms {
        atoms.push((x.x, weight * x.w));
    }
    let mut dens = vec![0.0; grid.len()];
    let mu_m = Measure::Discrete(mu.clone());
    let mut power = Measure::Discrete(mu.clone());
    for j in 2..=kmax {
        weight *= at / j as f64;
        let next = convolve_measures(k, &power, &mu_m, Some(&grid), usize::MAX)?;
        let g = next.density.ok_or_else(|| Error::Coverage("convolution power lost its density".into()))?;
        for (d, v) in dens.iter_mut().zip(&g.values) {
            *d += weight * v;
        }
        power = Measure::Density(g);
        if weight < 1e-17 {
            break;
        }
    }
    Ok(MixedMeasure { density: Some(GridDensity::new(grid, dens, 0.0)?), atoms })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianCriterionReport {
    pub eps: f64,
    pub route: String,
    /// (t, (1/t) μ_t[ε, ∞)).
    pub points: Vec<(f64, f64)>,
    pub decreasing: bool,
    pub last: f64,
}

/// (1/t) μ_t[ε, ∞) along `t_seq`. Pure Gaussian exponents use the law of the
/// time-changed diffusion, compound Poisson ones the series, and mixed
/// exponents the inversion.
pub fn gaussian_criterion(p: &Params, psi: &ExponentFn, eps: f64, t_seq: &[f64]) -> Result<GaussianCriterionReport> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("epsilon must be > 0, got {eps}")));
    }
    let mut points = Vec::with_capacity(t_seq.len());
    let route;
    if psi.levy.is_empty() {
        route = "diffusion-pde";
        for &t in t_seq {
            let tail = if psi.gaussian_coef == 0.0 { 0.0 } else { diffusion_law(p, psi.gaussian_coef * t, 0.0)?.tail(eps) };
            points.push((t, tail / t));
        }
    } else if psi.gaussian_coef == 0.0 {
        route = "compound-poisson-series";
        let k = QKernel::new(p)?;
        for &t in t_seq {
            let law = compound_poisson_law(&k, psi, t, None)?;
            let mut tail: f64 = law.atoms.iter().filter(|a| a.0 >= eps).map(|a| a.1).sum();
            if let Some(g) = &law.density {
                tail += g.tail_mass(p, eps)?;
            }
            points.push((t, tail / t));
        }
    } else {
        route = "inversion";
        for &t in t_seq {
            let g = semigroup_density(p, psi, t, None, &QuadConfig::loose())?;
            points.push((t, g.tail_mass(p, eps)? / t));
        }
    }
    let decreasing = points.windows(2).all(|w| w[1].1 <= w[0].1);
    let last = points.last().map_or(f64::NAN, |q| q.1);
    Ok(GaussianCriterionReport { eps, route: route.into(), points, decreasing, last })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemigroupActionReport {
    pub t: f64,
    /// (λ, x-space transform, e^{−tψ} f̂).
    pub rows: Vec<(f64, f64, f64)>,
    pub max_gap: f64,
    pub pass: bool,
}

/// (T_t f)(x) = ∫ (𝒯^y f)(x) μ_t(dy) computed in x-space, transformed and
/// compared with e^{−tψ(λ)} f̂(λ).
pub fn l2_semigroup_action_check(
    p: &Params,
    psi: &ExponentFn,
    t: f64,
    f: &(dyn Fn(f64) -> f64 + Sync),
    support: (f64, f64),
    lambdas: &[f64],
) -> Result<SemigroupActionReport> {
    let cfg = QuadConfig::loose();
    let fhat = |l: f64| forward_transform(p, f, support, SpectralPoint::new(p, l)?, &QuadConfig::default());
    if t == 0.0 {
        let rows: Vec<(f64, f64, f64)> = lambdas.iter().map(|&l| Ok((l, fhat(l)?, fhat(l)?))).collect::<Result<_>>()?;
        return Ok(SemigroupActionReport { t, rows, max_gap: 0.0, pass: true });
    }
    let k = QKernel::new(p)?;
    let mu_t = semigroup_density(p, psi, t, None, &cfg)?;
    let env = GrowthEnvelope::bounded(f64::INFINITY);
    let tf = |x: f64| -> Result<f64> {
        let inner = QuadConfig { abs_tol: 1e-12, rel_tol: 1e-9, ..QuadConfig::default() };
        mu_t.integrate(p, |y| translate(&k, f, &env, y, x, &inner))
    };
    let xs = geometric_grid(0.05, 40.0, 160);
    let tvals: Vec<f64> = xs.par_iter().map(|&x| tf(x)).collect::<Result<_>>()?;
    let tg = GridDensity::new(xs, tvals.iter().map(|v| v.max(0.0)).collect(), 0.0)?;
    let rows: Vec<(f64, f64, f64)> = lambdas
        .iter()
        .map(|&l| {
            let lhs = tg.transform(p, SpectralPoint::new(p, l)?)?;
            let rhs = (-t * psi.eval(p, l)?).exp() * fhat(l)?;
            Ok((l, lhs, rhs))
        })
        .collect::<Result<_>>()?;
    let max_gap = rows.iter().map(|r| (r.1 - r.2).abs()).fold(0.0, f64::max);
    Ok(SemigroupActionReport { t, rows, max_gap, pass: max_gap <= 1e-4 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p0() -> Params {
        Params::new(0.0).unwrap()
    }

    #[test]
    fn exponent_basics() {
        let p = p0();
        let g = ExponentFn::gaussian(1.0).unwrap();
        assert_eq!(g.eval(&p, 0.0).unwrap(), 0.0);
        assert!((g.eval(&p, 2.5).unwrap() - 2.5).abs() < 1e-15);
        let mu = DiscreteMeasure::dirac(1.0).unwrap();
        let cp = ExponentFn::compound_poisson(2.0, &mu).unwrap();
        let l = 1.3;
        let psi = cp.eval(&p, l).unwrap();
        let ehat = compound_poisson_transform(&p, 2.0, &mu, l).unwrap();
        assert!((psi + ehat.ln()).abs() < 1e-13);
        let back = ExponentFn::from_json(&cp.to_json().unwrap()).unwrap();
        assert_eq!(back, cp);
        assert!(ExponentFn::gaussian(-1.0).is_err());
    }

    #[test]
    fn compound_poisson_series_and_divisibility() {
        let p = p0();
        let mu = DiscreteMeasure::new([(0.5, 0.3), (2.0, 0.7)]).unwrap();
        for &l in &[0.0, 0.7, 3.0] {
            let e = compound_poisson_transform(&p, 2.0, &mu, l).unwrap();
            let s = compound_poisson_series(&p, 2.0, &mu, l, 40).unwrap();
            assert!((e - s).abs() < 1e-10);
            for n in 1..=10 {
                let part = compound_poisson_transform(&p, 2.0 / n as f64, &mu, l).unwrap();
                assert!((part.powi(n) - e).abs() <= 1e-13 * e);
            }
        }
        let d0 = DiscreteMeasure::dirac(0.0).unwrap();
        assert_eq!(compound_poisson_transform(&p, 3.0, &d0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn growth_is_linear() {
        let p = p0();
        let mu = DiscreteMeasure::dirac(1.0).unwrap();
        let psi = build_exponent(0.5, &mu).unwrap();
        let c = linear_growth_constant(&p, &psi, 50.0, 50).unwrap();
        assert!(c > 0.0 && c < 2.0);
    }

    #[test]
    fn semigroup_density_roundtrip() {
        let p = p0();
        let psi = ExponentFn::gaussian(1.0).unwrap();
        let g = semigroup_density(&p, &psi, 0.5, None, &QuadConfig::loose()).unwrap();
        for &l in &[0.5, 1.0, 3.0] {
            let hat = g.transform(&p, SpectralPoint::new(&p, l).unwrap()).unwrap();
            assert!((hat - (-0.5 * l).exp()).abs() < 1e-3, "{l} {hat}");
        }
        let cp = ExponentFn::compound_poisson(1.0, &DiscreteMeasure::dirac(1.0).unwrap()).unwrap();
        assert!(semigroup_density(&p, &cp, 0.5, None, &QuadConfig::loose()).is_err());
    }

    #[test]
    fn compound_poisson_law_mass_and_transform() {
        let p = p0();
        let k = QKernel::new(&p).unwrap();
        let psi = ExponentFn::compound_poisson(1.5, &DiscreteMeasure::dirac(1.0).unwrap()).unwrap();
        let law = compound_poisson_law(&k, &psi, 0.4, None).unwrap();
        let mass = law.mass(&p).unwrap();
        assert!((mass - 1.0).abs() < 1e-4, "{mass}");
        assert!((law.atoms[0].1 - (-0.6f64).exp()).abs() < 1e-15);
        let l = 1.0;
        let d = law.density.as_ref().unwrap().transform(&p, SpectralPoint::new(&p, l).unwrap()).unwrap();
        let at: f64 = law.atoms.iter().map(|a| a.1 * bw_lambda(&p, l, a.0).unwrap()).sum();
        let want = (-0.4 * psi.eval(&p, l).unwrap()).exp();
        assert!((d + at - want).abs() < 1e-4, "{} {want}", d + at);
    }
}
