//! The `verify` suites: reduced versions of the acceptance checks with a
//! machine-readable report.

use serde::Serialize;

use whitconv::convolve::{conv_cdf, convolve_measures, convolve_point_masses, kernel_mass, QKernel, MAX_ATOM_PAIRS};
use whitconv::infdiv::{default_semigroup_grid, gaussian_criterion, semigroup_density, ExponentFn};
use whitconv::moments::{normalized_pair, phi_tilde, phi_tilde1_closed};
use whitconv::processes::{
    ks_critical_1pct, ks_critical_1pct_two, ks_statistic, ks_two_sample, martingale_check, mean_se, oplus_samples,
    quadratic_variation_check, random_walk, simulate_diffusion, Compensator, MartingaleReport, Scheme,
};
use whitconv::quad::{integrate, QuadConfig};
use whitconv::specfun::{bw, bw_lambda};
use whitconv::spectral::{
    forward_transform, inverse_transform_many, ln_m_weight, spectral_l2_norm_sq, DiscreteMeasure, Measure,
    SpectralPoint,
};
use whitconv::{Error, Order, Params, Result, Route};

pub const SUITES: [&str; 8] = ["kernel", "transform", "convolution", "semigroup", "diffusion", "moments", "martingale", "walk"];

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn le(name: &str, value: f64, tol: f64) -> Self {
        Check { name: name.into(), value, tol, pass: value <= tol, note: None }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub suite: String,
    pub alpha: f64,
    pub version: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub struct Options {
    pub paths: usize,
    pub seed: Option<u64>,
}

pub fn needs_seed(suite: &str) -> bool {
    matches!(suite, "diffusion" | "martingale" | "walk")
}

pub fn run(suite: &str, p: &Params, opt: &Options) -> Result<Report> {
    let seed = || opt.seed.ok_or_else(|| Error::InvalidParam(format!("suite '{suite}' is randomized and needs --seed")));
    let checks = match suite {
        "kernel" => kernel(p)?,
        "transform" => transform(p)?,
        "convolution" => convolution(p)?,
        "semigroup" => semigroup(p)?,
        "diffusion" => diffusion(p, opt.paths, seed()?)?,
        "moments" => moments(p)?,
        "martingale" => martingale(p, opt.paths, seed()?)?,
        "walk" => walk(p, opt.paths, seed()?)?,
        _ => return Err(Error::InvalidParam(format!("unknown suite '{suite}' (one of {})", SUITES.join(", ")))),
    };
    let pass = checks.iter().all(|c| c.pass);
    Ok(Report { suite: suite.into(), alpha: p.alpha, version: whitconv::VERSION.into(), checks, pass })
}

const PROBES: [f64; 3] = [0.3, 1.0, 3.0];

fn kernel(p: &Params) -> Result<Vec<Check>> {
    let k = QKernel::new(p)?;
    let cfg = QuadConfig { abs_tol: 1e-12, rel_tol: 1e-10, ..QuadConfig::default() };
    let mut mass = 0.0f64;
    let mut prod = 0.0f64;
    for &x in &PROBES {
        for &y in &PROBES {
            mass = mass.max((kernel_mass(&k, x, y, &cfg)? - 1.0).abs());
            for &l in &[0.0, p.h2() + 0.5, 2.0] {
                let lhs = bw_lambda(p, l, x)? * bw_lambda(p, l, y)?;
                let mut err = None;
                let rhs = k.integrate(x, y, |xi| bw_lambda(p, l, xi).unwrap_or_else(|e| { err.get_or_insert(e); 0.0 }), &cfg)?;
                if let Some(e) = err {
                    return Err(e);
                }
                prod = prod.max((lhs - rhs).abs());
            }
        }
    }
    Ok(vec![Check::le("kernel_mass", mass, 1e-6), Check::le("product_formula", prod, 1e-6)])
}

fn bump(x: f64) -> f64 {
    let u = (x - 1.0) / 0.5;
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - u * u).powi(3)
    }
}

fn transform(p: &Params) -> Result<Vec<Check>> {
    let mut routes = 0.0f64;
    for o in [Order::real(0.0), Order::real(0.5 * p.h()), Order::imag(1.0), Order::imag(5.0)] {
        for &x in &[0.1, 1.0, 10.0] {
            let t = bw(p, o, x, Route::Tricomi)?;
            let l = bw(p, o, x, Route::Laplace)?;
            routes = routes.max(((t - l) / t).abs());
        }
    }
    let cfg = QuadConfig::default();
    let support = (0.5, 1.5);
    let fhat = |l: f64| forward_transform(p, bump, support, SpectralPoint::new(p, l)?, &cfg);
    let xs: Vec<f64> = (0..=10).map(|i| 0.5 + 1.5 * i as f64 / 10.0).collect();
    let inv_cfg = QuadConfig { truncation_tail_tol: 1e-4, ..QuadConfig::default() };
    let back = inverse_transform_many(p, fhat, &xs, &inv_cfg)?;
    let sup = xs.iter().zip(&back).map(|(&x, v)| (v - bump(x)).abs()).fold(0.0, f64::max);
    let mut out = vec![Check::le("laplace_vs_tricomi", routes, 1e-8), Check::le("inversion_sup_error", sup, 1e-3)];
    if p.alpha > 0.0 {
        let lhs = integrate(|x| bump(x).powi(2) * ln_m_weight(p, x).exp(), 0.5, 1.5, &cfg)?;
        let norm_cfg = QuadConfig { abs_tol: 1e-12, rel_tol: 1e-8, truncation_tail_tol: 1e-10, ..QuadConfig::default() };
        let rhs = spectral_l2_norm_sq(p, fhat, &norm_cfg)?;
        out.push(Check::le("plancherel_rel_gap", ((lhs - rhs) / lhs).abs(), 1e-3));
    } else {
        out.push(Check {
            name: "plancherel_rel_gap".into(),
            value: f64::NAN,
            tol: 1e-3,
            pass: true,
            note: Some("skipped: the identity is asserted for alpha > 0 only".into()),
        });
    }
    Ok(out)
}

fn convolution(p: &Params) -> Result<Vec<Check>> {
    let k = QKernel::new(p)?;
    let ident = convolve_measures(
        &k,
        &Measure::Discrete(DiscreteMeasure::dirac(0.0)?),
        &Measure::Discrete(DiscreteMeasure::dirac(2.0)?),
        None,
        MAX_ATOM_PAIRS,
    )?;
    let ident_gap = match (ident.density.as_ref(), ident.atoms.as_slice()) {
        (None, [(x, w)]) => (x - 2.0).abs() + (w - 1.0).abs(),
        _ => f64::INFINITY,
    };
    let conv = convolve_point_masses(&k, 1.0, 2.0, None)?;
    let mut prod = 0.0f64;
    for &l in &[0.5, 2.0, 6.0] {
        let lhs = conv.transform(p, SpectralPoint::new(p, l)?)?;
        let rhs = bw_lambda(p, l, 1.0)? * bw_lambda(p, l, 2.0)?;
        prod = prod.max((lhs - rhs).abs());
    }
    let mass = (conv.mass(p)? - 1.0).abs();
    Ok(vec![
        Check::le("identity_element", ident_gap, 1e-15),
        Check::le("point_mass_transform_product", prod, 1e-4),
        Check::le("point_mass_unit_mass", mass, 1e-4),
    ])
}

fn semigroup(p: &Params) -> Result<Vec<Check>> {
    let cfg = QuadConfig::loose();
    let psi = ExponentFn::gaussian(1.0)?;
    let (s, t) = (0.3, 0.4);
    let ms = semigroup_density(p, &psi, s, None, &cfg)?;
    let mut hat = 0.0f64;
    for &l in &[0.5, 1.0, 3.0] {
        hat = hat.max((ms.transform(p, SpectralPoint::new(p, l)?)? - (-s * l).exp()).abs());
    }
    let mt = semigroup_density(p, &psi, t, None, &cfg)?;
    let grid = default_semigroup_grid(s + t);
    let mst = semigroup_density(p, &psi, s + t, Some(&grid), &cfg)?;
    let k = QKernel::new(p)?;
    let conv = convolve_measures(&k, &Measure::Density(ms), &Measure::Density(mt), Some(&grid), usize::MAX)?;
    let l1 = conv.density.ok_or_else(|| Error::Coverage("closure convolution has no density".into()))?.l1_distance(&mst, p)?;
    let g = gaussian_criterion(p, &psi, 0.5, &[0.1, 0.01, 0.001])?;
    let cp = ExponentFn::compound_poisson(1.0, &DiscreteMeasure::dirac(1.0)?)?;
    let c = gaussian_criterion(p, &cp, 0.5, &[0.1, 0.01, 0.001])?;
    let cp_min = c.points.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::le("transform_matches_exponent", hat, 1e-3),
        Check::le("closure_l1", l1, 1e-2),
        Check { name: "gaussian_tail_rate".into(), value: g.last, tol: 1e-3, pass: g.decreasing && g.last < 1e-3, note: Some(g.route) },
        Check { name: "compound_poisson_tail_rate".into(), value: cp_min, tol: 0.1, pass: cp_min > 0.1, note: Some("must stay above tol".into()) },
    ])
}

fn worst_sigmas(r: &MartingaleReport) -> f64 {
    r.rows.iter().map(|row| row.estimate.abs() / row.std_error.max(1e-300)).fold(0.0, f64::max)
}

fn mc_check(name: &str, reports: &[MartingaleReport]) -> Check {
    let worst = reports.iter().map(worst_sigmas).fold(0.0, f64::max);
    Check { name: name.into(), value: worst, tol: 3.0, pass: reports.iter().all(|r| r.pass), note: Some("max |estimate| / SE".into()) }
}

fn diffusion(p: &Params, paths: usize, seed: u64) -> Result<Vec<Check>> {
    let times = [0.0, 0.1, 0.5, 1.0];
    let ens = simulate_diffusion(p, 1.0, &times, paths, seed, Scheme::ExactExpFunctional)?;
    let pairs: Vec<(f64, f64)> = times[1..].iter().map(|&t| (0.0, t)).collect();
    let mut reps = Vec::new();
    for &l in &[0.5, 1.0, 3.0] {
        let g = |y: f64| bw_lambda(p, l, y).unwrap_or(f64::NAN);
        reps.push(martingale_check(&ens, &g, &Compensator::Exponential(l), &pairs)?);
    }
    let n2 = paths.min(5000);
    let euler = simulate_diffusion(p, 1.0, &[0.0, 1.0], n2, seed ^ 0x5eed, Scheme::EulerFallback)?;
    let exact = simulate_diffusion(p, 1.0, &[0.0, 1.0], n2, seed, Scheme::ExactExpFunctional)?;
    let ks = ks_two_sample(&exact.column(1), &euler.column(1));
    let crit = ks_critical_1pct_two(n2, n2);
    Ok(vec![mc_check("spectral_martingale", &reps), Check::le("exact_vs_euler_ks", ks, crit)])
}

fn moments(p: &Params) -> Result<Vec<Check>> {
    let np = normalized_pair(p)?;
    let mut closed = 0.0f64;
    for &x in &[0.1, 0.7, 1.0, 3.0, 10.0] {
        let a = phi_tilde(p, 1, x)?;
        closed = closed.max(((a - phi_tilde1_closed(p, x)?) / a).abs());
    }
    let x: f64 = 0.02;
    let a = p.alpha;
    let r1 = (phi_tilde(p, 1, x)? - 2.0 * (1.0 - 2.0 * a) * x * x) / x.powi(4);
    let w1 = -4.0 * (1.0 - 2.0 * a) * (1.0 - a);
    let r2 = (phi_tilde(p, 2, x)? - 4.0 * x * x) / x.powi(4);
    let w2 = -4.0 * (1.0 + 2.0 * a - 4.0 * a * a);
    let taylor = ((r1 - w1) / w1).abs().max(((r2 - w2) / w2).abs());
    let mut jensen = 0.0f64;
    for &x in &[0.3, 1.0, 3.0, 30.0] {
        let f1 = phi_tilde(p, 1, x)?;
        jensen = jensen.max(f1 * f1 - phi_tilde(p, 2, x)?);
    }
    Ok(vec![
        Check {
            name: "calibration_residual".into(),
            value: np.calibration_residual,
            tol: 1e-3,
            pass: np.calibration_residual <= 1e-3,
            note: Some(format!("c = {:.6}, printed constant {}", np.normalization_factor, np.printed_factor)),
        },
        Check::le("closed_form_phi1_rel_gap", closed, 1e-6),
        Check::le("taylor_rel_gap", taylor, 0.02),
        Check::le("jensen_violation", jensen, 0.0),
    ])
}

fn martingale(p: &Params, paths: usize, seed: u64) -> Result<Vec<Check>> {
    let np = normalized_pair(p)?;
    let times = [0.0, 0.25, 1.0];
    let ens = simulate_diffusion(p, 0.0, &times, paths, seed, Scheme::ExactExpFunctional)?;
    let pairs = [(0.0, 0.25), (0.0, 1.0)];
    let phi1 = |y: f64| np.phi1(y).unwrap_or(f64::NAN);
    let phi2 = |y: f64| np.phi2(y).unwrap_or(f64::NAN);
    let c1 = |t: f64, _y: f64| t;
    let c2 = |t: f64, y: f64| 2.0 * t * np.phi1(y).unwrap_or(f64::NAN) - t * t;
    let r1 = martingale_check(&ens, &phi1, &Compensator::Additive(&c1), &pairs)?;
    let r2 = martingale_check(&ens, &phi2, &Compensator::Additive(&c2), &pairs)?;
    let n = 256;
    let fine: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let qens = simulate_diffusion(p, 1.0, &fine, paths.min(2000), seed.wrapping_add(1), Scheme::ExactExpFunctional)?;
    let qv = quadratic_variation_check(&qens, &|y| np.phi1(y), &|y| np.phi1_deriv(y))?;
    Ok(vec![
        mc_check("phi1_martingale", &[r1]),
        mc_check("phi2_martingale", &[r2]),
        Check::le("quadratic_variation_gap", qv.mean_rel_gap, 0.05),
    ])
}

fn walk(p: &Params, paths: usize, seed: u64) -> Result<Vec<Check>> {
    let k = QKernel::new(p)?;
    let s = oplus_samples(&k, 1.0, 1.0, paths, seed)?;
    let cfg = QuadConfig::default();
    let err = std::cell::RefCell::new(None);
    let d = ks_statistic(&s, |z| {
        conv_cdf(&k, 1.0, 1.0, z, &cfg).unwrap_or_else(|e| {
            err.borrow_mut().get_or_insert(e);
            0.0
        })
    });
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let step = Measure::Discrete(DiscreteMeasure::new([(0.5, 0.5), (1.5, 0.5)])?);
    let ens = random_walk(p, &step, 2, paths, seed.wrapping_add(1))?;
    let l = 1.0;
    let vals: Vec<f64> = ens.column(2).iter().map(|&y| bw_lambda(p, l, y)).collect::<Result<_>>()?;
    let (mean, se) = mean_se(&vals);
    let want = step.transform(p, SpectralPoint::new(p, l)?)?.powi(2);
    let z = (mean - want).abs() / se.max(1e-300);
    Ok(vec![
        Check::le("oplus_ks", d, ks_critical_1pct(paths)),
        Check { name: "two_step_transform".into(), value: z, tol: 3.0, pass: z <= 3.0, note: Some("|mean - muhat^2| / SE".into()) },
    ])
}
