use std::io::Write;

use nalgebra::DVector;

use crate::cdf::CdfInstance;
use crate::error::{Error, Result};
use crate::problems::hyperbola2d_problem;

/// Constraint gradients at most this long count as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Rectangular grid with `nx * ny` points, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            xmin: 0.0,
            xmax: 2.0,
            ymin: -0.5,
            ymax: 1.5,
            nx: 101,
            ny: 101,
        }
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Argument("grid needs at least one point per axis".into()));
        }
        if !(self.xmin <= self.xmax && self.ymin <= self.ymax) {
            return Err(Error::Argument("grid bounds must satisfy min <= max".into()));
        }
        Ok(())
    }

    /// Points in row-major order: `x` varies fastest.
    pub fn points(&self) -> Vec<(f64, f64)> {
        axis(self.ymin, self.ymax, self.ny)
            .flat_map(|y| axis(self.xmin, self.xmax, self.nx).map(move |x| (x, y)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourPoint {
    pub x: f64,
    pub y: f64,
    pub h: f64,
    /// Fletcher's penalty; NaN where the constraint gradient vanishes.
    pub phi: f64,
}

/// Evaluates the dissolving function `h` of the hyperbola example and
/// Fletcher's penalty
///
/// ```text
/// phi(w) = f(w) - u(w) c(w) + (beta/2) c(w)^2,   u(w) = J_c(w)^T grad f(w) / |J_c(w)|^2
/// ```
///
/// over the grid.
pub fn contour_grid(grid: &Grid, beta: f64) -> Result<Vec<ContourPoint>> {
    grid.validate()?;
    let p = hyperbola2d_problem()?;
    let inst = CdfInstance::new(p.spec.clone(), p.objective.clone(), beta)?;
    let one = DVector::from_element(1, 1.0);
    grid.points()
        .into_iter()
        .map(|(x, y)| {
            let w = DVector::from_column_slice(&[x, y]);
            let h = inst.value(&w)?;
            let c = p.spec.constraint_eval(&w)?[0];
            let jc = p.spec.constraint_jac_apply(&w, &one)?;
            let jn2 = jc.norm_squared();
            let phi = if jn2.sqrt() <= SINGULAR_TOL {
                f64::NAN
            } else {
                let u = jc.dot(&p.objective.gradient(&w)) / jn2;
                p.objective.value(&w) - u * c + 0.5 * beta * c * c
            };
            Ok(ContourPoint { x, y, h, phi })
        })
        .collect()
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        v.to_string()
    }
}

/// CSV with header `x,y,h,phi`.
pub fn write_contour<W: Write>(mut out: W, points: &[ContourPoint]) -> Result<()> {
    writeln!(out, "x,y,h,phi")?;
    for p in points {
        writeln!(out, "{},{},{},{}", fmt(p.x), fmt(p.y), fmt(p.h), fmt(p.phi))?;
    }
    Ok(())
}
