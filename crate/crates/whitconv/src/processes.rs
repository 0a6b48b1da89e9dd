//! The index Whittaker diffusion and *-Lévy processes: path simulation,
//! transition laws, ⊕-random walks and Monte Carlo martingale checks.

use std::io::Write;
use std::path::Path as FsPath;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convolve::{geometric_grid, oplus_sample, ConvCdf, MixedMeasure, QKernel};
use crate::error::{Error, Result};
use crate::infdiv::{compound_poisson_law, semigroup_density, ExponentFn};
use crate::quad::{pairwise_sum, QuadConfig};
use crate::specfun::{bw_lambda, Params};
use crate::spectral::{inverse_transform_many, m_weight, GridDensity, Measure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    ExactExpFunctional,
    EulerFallback,
    SemigroupChain,
    OplusWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Stream key: (ensemble seed, path index).
    pub seed: u64,
    pub stream: u64,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub paths: Vec<Path>,
    pub alpha: f64,
    pub exponent: Option<ExponentFn>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub alpha: f64,
    pub exponent: Option<ExponentFn>,
    pub seed: u64,
    pub scheme: Scheme,
    pub n_paths: usize,
    pub n_times: usize,
}

impl PathEnsemble {
    pub fn times(&self) -> &[f64] {
        &self.paths[0].times
    }

    /// Values of all paths at time index k.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.values[k]).collect()
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times()
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| Error::InvalidParam(format!("time {t} is not on the ensemble grid")))
    }

    pub fn manifest(&self) -> Manifest {
        let p0 = &self.paths[0];
        Manifest {
            version: crate::VERSION.to_string(),
            alpha: self.alpha,
            exponent: self.exponent.clone(),
            seed: p0.seed,
            scheme: p0.scheme,
            n_paths: self.paths.len(),
            n_times: p0.times.len(),
        }
    }

    /// Long format: path_id, t, value.
    pub fn write_csv_to(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path_id", "t", "value"])?;
        for (i, path) in self.paths.iter().enumerate() {
            for (t, v) in path.times.iter().zip(&path.values) {
                w.write_record([i.to_string(), format!("{t:e}"), format!("{v:e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &FsPath) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParam("times must start at 0 and increase strictly".into()));
    }
    Ok(())
}

/// Internal sub-steps per output interval.
pub const REFINEMENT: usize = 8;
/// Largest internal step for the diffusion schemes.
pub const MAX_INTERNAL_STEP: f64 = 1.0 / 512.0;
/// Cap on internal steps per path.
pub const MAX_INTERNAL_STEPS: usize = 1 << 22;

/// Paths of Y for dY = ¼(Y⁻¹ + (3−4α)Y)dt + 2^{−1/2} Y dW.
///
/// The exact scheme works with Z = Y², dZ = (½ + 2(1−α)Z)dt + √2 Z dW, whose
/// solution is Z_t = G_t(Z_0 + ½∫₀^t G_s⁻¹ ds) with G = exp(√2 W + (1−2α)t).
/// On each sub-step G is advanced exactly and the time integral by the
/// trapezoid rule, so Z stays positive. The Euler fallback runs on V = 2Z
/// with full truncation at 0.
pub fn simulate_diffusion(
    p: &Params,
    y0: f64,
    times: &[f64],
    n_paths: usize,
    seed: u64,
    scheme: Scheme,
) -> Result<PathEnsemble> {
    check_times(times)?;
    if !(y0 >= 0.0 && y0.is_finite()) {
        return Err(Error::InvalidParam(format!("start point must be >= 0, got {y0}")));
    }
    if n_paths == 0 {
        return Err(Error::InvalidParam("need at least one path".into()));
    }
    if !matches!(scheme, Scheme::ExactExpFunctional | Scheme::EulerFallback) {
        return Err(Error::InvalidParam(format!("{scheme:?} is not a diffusion scheme")));
    }
    let subs: Vec<usize> = times
        .windows(2)
        .map(|w| REFINEMENT * ((w[1] - w[0]) / (REFINEMENT as f64 * MAX_INTERNAL_STEP)).ceil().max(1.0) as usize)
        .collect();
    let total: usize = subs.iter().sum();
    if total > MAX_INTERNAL_STEPS {
        return Err(Error::Instability(format!("{total} internal steps exceed the cap of {MAX_INTERNAL_STEPS}")));
    }
    let c = 1.0 - 2.0 * p.alpha;
    let drift = 2.0 * (1.0 - p.alpha);
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let mut values = Vec::with_capacity(times.len());
            values.push(y0);
            let mut z = y0 * y0;
            let mut v = 2.0 * z;
            for (k, w) in times.windows(2).enumerate() {
                let n = subs[k];
                let d = (w[1] - w[0]) / n as f64;
                let sd = d.sqrt();
                for _ in 0..n {
                    let g: f64 = rng.sample(StandardNormal);
                    match scheme {
                        Scheme::ExactExpFunctional => {
                            let e = (std::f64::consts::SQRT_2 * sd * g + c * d).exp();
                            z = e * z + 0.25 * d * (e + 1.0);
                        }
                        _ => {
                            let vp = v.max(0.0);
                            v += (1.0 + drift * vp) * d + std::f64::consts::SQRT_2 * vp * sd * g;
                        }
                    }
                }
                values.push(match scheme {
                    Scheme::ExactExpFunctional => z.sqrt(),
                    _ => (0.5 * v.max(1e-300)).sqrt(),
                });
            }
            Path { times: times.to_vec(), values, seed, stream: i, scheme }
        })
        .collect();
    Ok(PathEnsemble { paths, alpha: p.alpha, exponent: Some(ExponentFn::gaussian(1.0)?) })
}

/// Law of Y_t started at y0, from the forward equation of U = ln Y²:
/// ∂_t p = ∂_u(∂_u p − b p), b(u) = ½e^{−u} + 1 − 2α, discretized with
/// exponentially fitted fluxes and implicit Euler on a graded time grid,
/// with one Richardson step in the number of time steps. Unlike spectral
/// inversion it stays well conditioned as t → 0.
#[derive(Debug, Clone)]
pub struct DiffusionLaw {
    /// Cell edges in u = ln y².
    pub edges: Vec<f64>,
    /// Probability of each cell.
    pub prob: Vec<f64>,
}

fn bern(x: f64) -> f64 {
    // x / (e^x − 1)
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else if x > 700.0 {
        x * (-x).exp()
    } else {
        x / x.exp_m1()
    }
}

fn fp_solve(p: &Params, t: f64, u0: f64, edges: &[f64], steps: usize) -> Vec<f64> {
    let n = edges.len() - 1;
    let du = edges[1] - edges[0];
    // fluxes at interior edges 1..n-1
    let pe: Vec<f64> = (0..=n)
        .map(|j| {
            let u = edges[j];
            (0.5 * (-u).exp() + 1.0 - 2.0 * p.alpha) * du
        })
        .collect();
    let mut dens = vec![0.0; n];
    let j0 = (((u0 - edges[0]) / du).floor().max(0.0) as usize).min(n - 1);
    dens[j0] = 1.0 / du;
    let mut prev_t = 0.0;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    for k in 1..=steps {
        let s = k as f64 / steps as f64;
        let tk = t * s * s * s;
        let dt = tk - prev_t;
        prev_t = tk;
        let r = dt / (du * du);
        for i in 0..n {
            let (mut d, mut lo, mut up) = (1.0, 0.0, 0.0);
            if i + 1 < n {
                let a = pe[i + 1];
                d += r * bern(-a);
                up = -r * bern(a);
            }
            if i > 0 {
                let a = pe[i];
                d += r * bern(a);
                lo = -r * bern(-a);
            }
            diag[i] = d;
            lower[i] = lo;
            upper[i] = up;
        }
        // Thomas algorithm
        cp[0] = upper[0] / diag[0];
        dp[0] = dens[0] / diag[0];
        for i in 1..n {
            let m = diag[i] - lower[i] * cp[i - 1];
            cp[i] = upper[i] / m;
            dp[i] = (dens[i] - lower[i] * dp[i - 1]) / m;
        }
        dens[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            dens[i] = dp[i] - cp[i] * dens[i + 1];
        }
    }
    dens.iter().map(|d| d * du).collect()
}

/// Number of cells and time steps of the forward-equation solver.
pub const FP_CELLS: usize = 4000;
pub const FP_STEPS: usize = 1500;

pub fn diffusion_law(p: &Params, t: f64, y0: f64) -> Result<DiffusionLaw> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("diffusion law needs t > 0, got {t}")));
    }
    let z0 = y0 * y0;
    let start = (z0 + 0.5 * t).ln();
    let lo = (1e-6 * (z0 + 0.5 * t)).ln().min(if z0 > 0.0 { z0.ln() - 1.0 } else { f64::INFINITY });
    let hi = start + (1.0 - 2.0 * p.alpha).max(0.0) * t + 14.0 * (2.0 * t).sqrt() + 3.0;
    let du = (hi - lo) / FP_CELLS as f64;
    let edges: Vec<f64> = (0..=FP_CELLS).map(|i| lo + i as f64 * du).collect();
    let u0 = if z0 > 0.0 { z0.ln() } else { lo };
    let a = fp_solve(p, t, u0, &edges, FP_STEPS);
    let b = fp_solve(p, t, u0, &edges, 2 * FP_STEPS);
    let prob: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (2.0 * y - x).max(0.0)).collect();
    Ok(DiffusionLaw { edges, prob })
}

impl DiffusionLaw {
    /// P(Y_t ≥ y).
    pub fn tail(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        let u = 2.0 * y.ln();
        let du = self.edges[1] - self.edges[0];
        let mut s = 0.0;
        for (i, &pr) in self.prob.iter().enumerate().rev() {
            let (a, b) = (self.edges[i], self.edges[i + 1]);
            if a >= u {
                s += pr;
            } else {
                if b > u {
                    s += pr * (b - u) / du;
                }
                break;
            }
        }
        s
    }

    pub fn cdf(&self, y: f64) -> f64 {
        1.0 - self.tail(y)
    }

    /// Density of Y_t against m(y)dy at y.
    pub fn density_m(&self, p: &Params, y: f64) -> Result<f64> {
        let u = 2.0 * y.ln();
        let du = self.edges[1] - self.edges[0];
        let i = ((u - self.edges[0]) / du - 0.5).floor();
        if i < 0.0 || i as usize + 1 >= self.prob.len() {
            return Ok(0.0);
        }
        let i = i as usize;
        let w = (u - self.edges[0]) / du - 0.5 - i as f64;
        let pu = ((1.0 - w) * self.prob[i] + w * self.prob[i + 1]) / du;
        Ok(pu * 2.0 / (y * m_weight(p, y)?))
    }
}

/// Transition density of Y against dy:
/// p_t(x, y) = m(y) ∫ e^{−tλ} 𝑾_λ(x) 𝑾_λ(y) ρ(λ) dλ.
pub fn transition_density_many(p: &Params, t: f64, x: f64, ys: &[f64], cfg: &QuadConfig) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("transition density needs t > 0, got {t}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("start point must be >= 0, got {x}")));
    }
    let v = inverse_transform_many(p, |l| Ok((-t * l).exp() * bw_lambda(p, l, x)?), ys, cfg)?;
    ys.iter().zip(v).map(|(&y, d)| Ok((d * m_weight(p, y)?).max(0.0))).collect()
}

pub fn transition_density(p: &Params, t: f64, x: f64, y: f64, cfg: &QuadConfig) -> Result<f64> {
    Ok(transition_density_many(p, t, x, &[y], cfg)?[0])
}

/// Tabulated CDF on a grid with piecewise-linear density (against dy).
#[derive(Debug, Clone)]
pub struct GridCdf {
    grid: Vec<f64>,
    dens: Vec<f64>,
    cum: Vec<f64>,
}

impl GridCdf {
    pub fn new(grid: Vec<f64>, dens: Vec<f64>) -> Result<Self> {
        let mut cum = vec![0.0];
        for i in 0..grid.len() - 1 {
            let last = *cum.last().unwrap();
            cum.push(last + 0.5 * (grid[i + 1] - grid[i]) * (dens[i] + dens[i + 1]));
        }
        let total = *cum.last().unwrap();
        if !(total > 0.0) {
            return Err(Error::Coverage("distribution has no mass on its grid".into()));
        }
        Ok(GridCdf { grid, dens, cum })
    }

    pub fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y <= self.grid[0] {
            return 0.0;
        }
        if y >= *self.grid.last().unwrap() {
            return 1.0;
        }
        let i = self.grid.partition_point(|&g| g <= y) - 1;
        (self.cum[i] + self.partial(i, y - self.grid[i])) / self.total()
    }

    fn partial(&self, i: usize, s: f64) -> f64 {
        let h = self.grid[i + 1] - self.grid[i];
        let slope = (self.dens[i + 1] - self.dens[i]) / h;
        self.dens[i] * s + 0.5 * slope * s * s
    }

    /// Inverse CDF by bisection to `ztol` relative.
    pub fn quantile(&self, u: f64, ztol: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("u must lie in (0, 1), got {u}")));
        }
        let target = u * self.total();
        let i = self.cum.partition_point(|&c| c < target);
        if i == 0 || i >= self.cum.len() {
            return Err(Error::Bracket(format!("quantile {u} not bracketed")));
        }
        let i = i - 1;
        let (mut a, mut b) = (0.0, self.grid[i + 1] - self.grid[i]);
        while b - a > ztol * self.grid[i + 1] {
            let m = 0.5 * (a + b);
            if self.cum[i] + self.partial(i, m) < target {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(self.grid[i] + 0.5 * (a + b))
    }
}

/// CDF of the transition law p_t(x, ·).
pub fn transition_cdf(p: &Params, t: f64, x: f64, cfg: &QuadConfig) -> Result<GridCdf> {
    let centre = (x * x + 0.5 * t).sqrt();
    let grid = geometric_grid(centre * 0.02, centre * (8.0 + 6.0 * t) + 2.0, 600);
    let dens = transition_density_many(p, t, x, &grid, cfg)?;
    let c = GridCdf::new(grid, dens)?;
    if (c.total() - 1.0).abs() > 1e-3 {
        return Err(Error::Coverage(format!("transition grid holds mass {}", c.total())));
    }
    Ok(c)
}

/// Inverse-CDF sample of p_t(x, ·) at u.
pub fn sample_transition(p: &Params, t: f64, x: f64, u: f64, cfg: &QuadConfig) -> Result<f64> {
    transition_cdf(p, t, x, cfg)?.quantile(u, 1e-8)
}

/// Sampler for a finite probability measure: atoms plus a grid density.
#[derive(Debug, Clone)]
pub struct MeasureSampler {
    atoms: Vec<(f64, f64)>,
    atom_mass: f64,
    dens: Option<GridCdf>,
    dens_mass: f64,
}

impl MeasureSampler {
    pub fn from_mixed(p: &Params, m: &MixedMeasure) -> Result<Self> {
        let atoms = m.atoms.clone();
        let atom_mass: f64 = atoms.iter().map(|a| a.1).sum();
        let (dens, dens_mass) = match &m.density {
            Some(g) => {
                let d: Vec<f64> = g.grid.iter().zip(&g.values).map(|(&x, &v)| Ok(v * m_weight(p, x)?)).collect::<Result<_>>()?;
                let c = GridCdf::new(g.grid.clone(), d)?;
                let mass = c.total();
                (Some(c), mass)
            }
            None => (None, 0.0),
        };
        if !(atom_mass + dens_mass > 0.0) {
            return Err(Error::InvalidParam("cannot sample from a zero measure".into()));
        }
        Ok(MeasureSampler { atoms, atom_mass, dens, dens_mass })
    }

    pub fn from_measure(p: &Params, m: &Measure) -> Result<Self> {
        match m {
            Measure::Discrete(d) => Self::from_mixed(p, &MixedMeasure { density: None, atoms: d.atoms.iter().map(|a| (a.x, a.w)).collect() }),
            Measure::Density(g) => {
                let mut g2 = g.clone();
                let a0 = g2.atom_at_zero;
                g2.atom_at_zero = 0.0;
                let atoms = if a0 > 0.0 { vec![(0.0, a0)] } else { vec![] };
                Self::from_mixed(p, &MixedMeasure { density: Some(g2), atoms })
            }
        }
    }

    pub fn from_density(p: &Params, g: &GridDensity) -> Result<Self> {
        Self::from_measure(p, &Measure::Density(g.clone()))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<f64> {
        let total = self.atom_mass + self.dens_mass;
        let u: f64 = rng.gen::<f64>() * total;
        if u < self.atom_mass {
            let mut acc = 0.0;
            for &(x, w) in &self.atoms {
                acc += w;
                if u < acc {
                    return Ok(x);
                }
            }
            return Ok(self.atoms.last().unwrap().0);
        }
        let d = self.dens.as_ref().expect("density part present");
        let v: f64 = rng.gen_range(f64::EPSILON..1.0);
        d.quantile(v, 1e-10)
    }
}

fn increment_law(p: &Params, k: &QKernel, psi: &ExponentFn, dt: f64) -> Result<MeasureSampler> {
    if psi.is_pure_compound_poisson() {
        MeasureSampler::from_mixed(p, &compound_poisson_law(k, psi, dt, None)?)
    } else {
        MeasureSampler::from_density(p, &semigroup_density(p, psi, dt, None, &QuadConfig::loose())?)
    }
}

/// *-Lévy chain: X_{k+1} = X_k ⊕_U Y with Y ~ μ_{Δt}.
pub fn simulate_levy(
    p: &Params,
    psi: &ExponentFn,
    x0: f64,
    times: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    check_times(times)?;
    if n_paths == 0 {
        return Err(Error::InvalidParam("need at least one path".into()));
    }
    let k = QKernel::new(p)?;
    let mut laws: Vec<(f64, MeasureSampler)> = Vec::new();
    let mut steps = Vec::new();
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let idx = match laws.iter().position(|l| (l.0 - dt).abs() <= 1e-12 * dt) {
            Some(i) => i,
            None => {
                laws.push((dt, increment_law(p, &k, psi, dt)?));
                laws.len() - 1
            }
        };
        steps.push(idx);
    }
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let mut x = x0;
            let mut values = vec![x0];
            for &li in &steps {
                let y = laws[li].1.sample(&mut rng)?;
                let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                x = oplus_sample(&k, x, y, u)?;
                values.push(x);
            }
            Ok(Path { times: times.to_vec(), values, seed, stream: i, scheme: Scheme::SemigroupChain })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathEnsemble { paths, alpha: p.alpha, exponent: Some(psi.clone()) })
}

/// S_0 = 0, S_n = S_{n−1} ⊕_{U_n} X_n with X_n i.i.d. from `step`.
pub fn random_walk(p: &Params, step: &Measure, n_steps: usize, n_chains: usize, seed: u64) -> Result<PathEnsemble> {
    if n_chains == 0 {
        return Err(Error::InvalidParam("need at least one chain".into()));
    }
    let mass = step.mass(p)?;
    if (mass - 1.0).abs() > 1e-3 {
        return Err(Error::InvalidParam(format!("step law must be a probability measure (mass {mass})")));
    }
    let k = QKernel::new(p)?;
    let sampler = MeasureSampler::from_measure(p, step)?;
    // a single-atom step law lets every chain share ⊕-CDFs by position
    let times: Vec<f64> = (0..=n_steps).map(|i| i as f64).collect();
    let paths = (0..n_chains as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let mut s = 0.0;
            let mut values = vec![0.0];
            for _ in 0..n_steps {
                let x = sampler.sample(&mut rng)?;
                let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                s = oplus_sample(&k, s, x, u)?;
                values.push(s);
            }
            Ok(Path { times: times.clone(), values, seed, stream: i, scheme: Scheme::OplusWalk })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathEnsemble { paths, alpha: p.alpha, exponent: None })
}

/// n samples of x ⊕_U y sharing one tabulated CDF.
pub fn oplus_samples(k: &QKernel, x: f64, y: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if x == 0.0 || y == 0.0 {
        return Ok(vec![x + y; n]);
    }
    let c = ConvCdf::new(k, x, y)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            c.quantile(k, u, 1e-10)
        })
        .collect()
}

/// How M_t is formed from g(X_t).
pub enum Compensator<'a> {
    /// M_t = g(X_t) − c(t, X_t).
    Additive(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
    /// M_t = e^{λt} g(X_t).
    Exponential(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MartingaleRow {
    pub s: f64,
    pub t: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub rows: Vec<MartingaleRow>,
    pub pass: bool,
}

/// Floor on the standard error below which a warning about path counts is
/// not issued.
pub const SE_WARN_FLOOR: f64 = 0.05;

/// Mean and standard error, reduced pairwise for determinism.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    let dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// E[M_t − M_s] against 0 within three standard errors.
pub fn martingale_check(
    ens: &PathEnsemble,
    g: &(dyn Fn(f64) -> f64 + Sync),
    comp: &Compensator,
    t_pairs: &[(f64, f64)],
) -> Result<MartingaleReport> {
    let m = |t: f64, x: f64| match comp {
        Compensator::Additive(c) => g(x) - c(t, x),
        Compensator::Exponential(l) => (l * t).exp() * g(x),
    };
    let mut rows = Vec::new();
    for &(s, t) in t_pairs {
        let (is, it) = (ens.time_index(s)?, ens.time_index(t)?);
        let diffs: Vec<f64> = ens.paths.par_iter().map(|p| m(t, p.values[it]) - m(s, p.values[is])).collect();
        let (est, se) = mean_se(&diffs);
        let scale = m(s, ens.paths[0].values[is]).abs().max(1.0);
        if se > SE_WARN_FLOOR * scale {
            log::warn!("martingale check ({s}, {t}): standard error {se:e} is large; more paths advised");
        }
        rows.push(MartingaleRow { s, t, estimate: est, std_error: se, pass: est.abs() <= 3.0 * se });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(MartingaleReport { rows, pass })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QvReport {
    pub t: f64,
    pub mean_realized: f64,
    pub mean_integrated: f64,
    /// |mean over paths of (realized/integrated − 1)|.
    pub mean_rel_gap: f64,
    pub steps_per_unit: f64,
    pub pass: bool,
}

/// Realized quadratic variation of φ(Y_t) − t against ½∫ Y² φ'(Y)² ds.
pub fn quadratic_variation_check(
    ens: &PathEnsemble,
    phi: &(dyn Fn(f64) -> Result<f64> + Sync),
    dphi: &(dyn Fn(f64) -> Result<f64> + Sync),
) -> Result<QvReport> {
    let times = ens.times().to_vec();
    let horizon = *times.last().unwrap();
    let steps_per_unit = (times.len() - 1) as f64 / horizon;
    if steps_per_unit < 200.0 {
        log::warn!("time grid has {steps_per_unit:.0} steps per unit time; at least 200 are advised");
    }
    let per_path: Vec<(f64, f64)> = ens
        .paths
        .par_iter()
        .map(|path| {
            let f: Vec<f64> = path.values.iter().map(|&y| phi(y)).collect::<Result<_>>()?;
            let q: Vec<f64> = path
                .values
                .iter()
                .map(|&y| Ok(0.5 * y * y * dphi(y)?.powi(2)))
                .collect::<Result<_>>()?;
            let mut rv = Vec::with_capacity(times.len());
            let mut iv = Vec::with_capacity(times.len());
            for k in 0..times.len() - 1 {
                let dt = times[k + 1] - times[k];
                rv.push((f[k + 1] - f[k] - dt).powi(2));
                iv.push(0.5 * dt * (q[k] + q[k + 1]));
            }
            Ok((pairwise_sum(&rv), pairwise_sum(&iv)))
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = per_path.iter().map(|(r, i)| r / i - 1.0).collect();
    let rs: Vec<f64> = per_path.iter().map(|q| q.0).collect();
    let is: Vec<f64> = per_path.iter().map(|q| q.1).collect();
    let gap = (pairwise_sum(&ratios) / ratios.len() as f64).abs();
    Ok(QvReport {
        t: horizon,
        mean_realized: pairwise_sum(&rs) / rs.len() as f64,
        mean_integrated: pairwise_sum(&is) / is.len() as f64,
        mean_rel_gap: gap,
        steps_per_unit,
        pass: gap <= 0.05,
    })
}

/// One-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

pub fn ks_critical_1pct_two(n: usize, m: usize) -> f64 {
    1.628 * ((n + m) as f64 / (n * m) as f64).sqrt()
}
