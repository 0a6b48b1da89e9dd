//! Parsers for the compact flag syntax (`real:0.5`, `0:5:50`, `dirac:2`, ...).

use std::path::Path;

use whitconv::infdiv::ExponentFn;
use whitconv::spectral::{DiscreteMeasure, GridDensity, Measure};
use whitconv::{Error, Order, Result, Route};

fn num(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("{what}: '{s}' is not a number")))
}

/// `real:v` or `imag:τ`.
pub fn order(s: &str) -> Result<Order> {
    match s.split_once(':') {
        Some(("real", v)) => Ok(Order::real(num(v, "--nu")?)),
        Some(("imag", t)) => {
            let t = num(t, "--nu")?;
            if t < 0.0 {
                return Err(Error::Parse("--nu imag:τ needs τ >= 0".into()));
            }
            Ok(Order::imag(t))
        }
        _ => Err(Error::Parse(format!("--nu expects real:v or imag:tau, got '{s}'"))),
    }
}

pub fn route(s: &str) -> Result<Route> {
    match s {
        "auto" => Ok(Route::Auto),
        "tricomi" => Ok(Route::Tricomi),
        "laplace" => Ok(Route::Laplace),
        _ => Err(Error::Parse(format!("unknown route '{s}' (auto, tricomi, laplace)"))),
    }
}

/// `a:b:n` (even spacing) or `geom:a:b:n`.
pub fn grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let (geom, rest) = match parts.as_slice() {
        ["geom", rest @ ..] => (true, rest),
        rest => (false, rest),
    };
    let [a, b, n] = rest else {
        return Err(Error::Parse(format!("grid expects a:b:n or geom:a:b:n, got '{s}'")));
    };
    let (a, b) = (num(a, "grid")?, num(b, "grid")?);
    let n: usize = n.parse().map_err(|_| Error::Parse(format!("grid: '{n}' is not a count")))?;
    if n == 0 || !(b >= a) || (n > 1 && b == a) {
        return Err(Error::Parse(format!("grid '{s}' is empty or decreasing")));
    }
    if geom && !(a > 0.0) {
        return Err(Error::Parse("geometric grid needs a > 0".into()));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            if geom {
                a * (b / a).powf(f)
            } else {
                a + (b - a) * f
            }
        })
        .collect())
}

/// `dirac:x`, `atoms:x@w,x@w`, `file:path.{json,csv}` (atoms) or
/// `density:path.csv`.
pub fn measure(s: &str) -> Result<Measure> {
    match s.split_once(':') {
        Some(("dirac", x)) => Ok(Measure::Discrete(DiscreteMeasure::dirac(num(x, "measure")?)?)),
        Some(("atoms", list)) => {
            let atoms = list
                .split(',')
                .map(|a| {
                    let (x, w) = a.split_once('@').ok_or_else(|| Error::Parse(format!("atom '{a}' is not x@w")))?;
                    Ok((num(x, "atom")?, num(w, "atom")?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Measure::Discrete(DiscreteMeasure::new(atoms)?))
        }
        Some(("file", path)) => Measure::read(Path::new(path), false),
        Some(("density", path)) => Ok(Measure::Density(GridDensity::read_csv(Path::new(path))?)),
        _ => Err(Error::Parse(format!("unknown measure '{s}' (dirac:x, atoms:x@w,..., file:path, density:path)"))),
    }
}

fn discrete(s: &str) -> Result<DiscreteMeasure> {
    match measure(s)? {
        Measure::Discrete(d) => Ok(d),
        Measure::Density(_) => Err(Error::InvalidParam("Lévy measures must be discrete".into())),
    }
}

/// `gaussian:b`, `cp:a:<measure>`, `levy:b:<measure>` or `file:psi.json`.
pub fn exponent(s: &str) -> Result<ExponentFn> {
    match s.split_once(':') {
        Some(("gaussian", b)) => ExponentFn::gaussian(num(b, "exponent")?),
        Some(("cp", rest)) => {
            let (a, m) = rest.split_once(':').ok_or_else(|| Error::Parse("cp expects cp:a:<measure>".into()))?;
            ExponentFn::compound_poisson(num(a, "exponent")?, &discrete(m)?)
        }
        Some(("levy", rest)) => {
            let (b, m) = rest.split_once(':').ok_or_else(|| Error::Parse("levy expects levy:b:<measure>".into()))?;
            ExponentFn::new(num(b, "exponent")?, &discrete(m)?)
        }
        Some(("file", path)) => ExponentFn::from_json(&std::fs::read_to_string(path)?),
        _ => Err(Error::Parse(format!("unknown exponent '{s}' (gaussian:b, cp:a:<measure>, levy:b:<measure>, file:path)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        let g = grid("geom:1:100:3").unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert!(grid("1:0:3").is_err());
        assert!(grid("geom:0:1:3").is_err());
        assert!(grid("1:2").is_err());
    }

    #[test]
    fn orders_and_measures() {
        assert_eq!(order("imag:2").unwrap(), Order::imag(2.0));
        assert!(order("cplx:1").is_err());
        let Measure::Discrete(d) = measure("atoms:1@0.25,2@0.75").unwrap() else { panic!() };
        assert_eq!(d.atoms.len(), 2);
        let e = exponent("cp:2:dirac:1").unwrap();
        assert!(e.is_pure_compound_poisson());
        assert!((e.levy_mass() - 2.0).abs() < 1e-15);
        assert!(exponent("gaussian:-1").is_err());
    }
}
