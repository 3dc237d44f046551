use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

use super::gauss::gauss_legendre;
use crate::error::{Error, Result};

const TWO_PI_I: C64 = C64::new(0.0, 2.0 * PI);
const CLOSURE_TOL: f64 = 1e-12;
const PANEL_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourCircle {
    pub center: C64,
    pub radius: f64,
    pub orientation: Orientation,
}

impl ContourCircle {
    pub fn new(center: C64, radius: f64, orientation: Orientation) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("circle radius {radius} must be positive")));
        }
        Ok(Self { center, radius, orientation })
    }

    /// Positively oriented circle about the origin.
    pub fn centered(radius: f64) -> Result<Self> {
        Self::new(C64::new(0.0, 0.0), radius, Orientation::Positive)
    }
}

/// A line segment or a circular arc; arcs run from `theta0` to `theta1`
/// in the direction given by the sign of `theta1 - theta0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Segment {
    Line { start: C64, end: C64 },
    Arc { center: C64, radius: f64, theta0: f64, theta1: f64 },
}

impl Segment {
    pub fn line(start: C64, end: C64) -> Self {
        Segment::Line { start, end }
    }

    pub fn arc(center: C64, radius: f64, theta0: f64, theta1: f64) -> Self {
        Segment::Arc { center, radius, theta0, theta1 }
    }

    /// Point at parameter `s` in [0, 1].
    pub fn point(&self, s: f64) -> C64 {
        match *self {
            Segment::Line { start, end } => start + (end - start) * s,
            Segment::Arc { center, radius, theta0, theta1 } => {
                center + C64::from_polar(radius, theta0 + (theta1 - theta0) * s)
            }
        }
    }

    /// dz/ds at parameter `s`.
    pub fn derivative(&self, s: f64) -> C64 {
        match *self {
            Segment::Line { start, end } => end - start,
            Segment::Arc { radius, theta0, theta1, .. } => {
                let th = theta0 + (theta1 - theta0) * s;
                C64::i() * C64::from_polar(radius, th) * (theta1 - theta0)
            }
        }
    }

    pub fn start(&self) -> C64 {
        self.point(0.0)
    }

    pub fn end(&self) -> C64 {
        self.point(1.0)
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { start, end } => (end - start).norm(),
            Segment::Arc { radius, theta0, theta1, .. } => radius * (theta1 - theta0).abs(),
        }
    }

    pub fn reversed(&self) -> Self {
        match *self {
            Segment::Line { start, end } => Segment::Line { start: end, end: start },
            Segment::Arc { center, radius, theta0, theta1 } => {
                Segment::Arc { center, radius, theta0: theta1, theta1: theta0 }
            }
        }
    }

    /// Image under complex conjugation (orientation of traversal preserved).
    pub fn conj(&self) -> Self {
        match *self {
            Segment::Line { start, end } => Segment::Line { start: start.conj(), end: end.conj() },
            Segment::Arc { center, radius, theta0, theta1 } => {
                Segment::Arc { center: center.conj(), radius, theta0: -theta0, theta1: -theta1 }
            }
        }
    }

    /// Image under z -> -z.
    pub fn negated(&self) -> Self {
        match *self {
            Segment::Line { start, end } => Segment::Line { start: -start, end: -end },
            Segment::Arc { center, radius, theta0, theta1 } => {
                Segment::Arc { center: -center, radius, theta0: theta0 + PI, theta1: theta1 + PI }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseContour {
    segments: Vec<Segment>,
    closed: bool,
}

impl PiecewiseContour {
    /// A closed contour; the last segment must end where the first starts.
    pub fn closed(segments: Vec<Segment>) -> Result<Self> {
        let c = Self::path(segments)?;
        let first = c.segments[0].start();
        let last = c.segments[c.segments.len() - 1].end();
        if (first - last).norm() > CLOSURE_TOL * (1.0 + first.norm()) {
            return Err(Error::InvalidInput(format!(
                "contour not closed: starts at {first}, ends at {last}"
            )));
        }
        Ok(Self { closed: true, ..c })
    }

    /// An open path, used for truncated infinite contours.
    pub fn path(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidInput("contour has no segments".into()));
        }
        for (k, s) in segments.iter().enumerate() {
            if !(s.length() > 0.0) {
                return Err(Error::InvalidInput(format!("segment {k} has zero length")));
            }
        }
        for (k, w) in segments.windows(2).enumerate() {
            let (a, b) = (w[0].end(), w[1].start());
            if (a - b).norm() > CLOSURE_TOL * (1.0 + a.norm()) {
                return Err(Error::InvalidInput(format!(
                    "segments {k} and {} do not meet: {a} vs {b}",
                    k + 1
                )));
            }
        }
        Ok(Self { segments, closed: false })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn reversed(&self) -> Self {
        Self {
            segments: self.segments.iter().rev().map(Segment::reversed).collect(),
            closed: self.closed,
        }
    }

    pub fn conj(&self) -> Self {
        Self { segments: self.segments.iter().map(Segment::conj).collect(), closed: self.closed }
    }

    pub fn negated(&self) -> Self {
        Self { segments: self.segments.iter().map(Segment::negated).collect(), closed: self.closed }
    }

    /// Sample `n` points spread by arc length (midpoints of equal pieces).
    pub fn sample(&self, n: usize) -> Vec<C64> {
        let total = self.length();
        let mut out = Vec::with_capacity(n);
        let mut seg = 0;
        let mut before = 0.0;
        for k in 0..n {
            let s = total * (k as f64 + 0.5) / n as f64;
            while seg + 1 < self.segments.len() && before + self.segments[seg].length() < s {
                before += self.segments[seg].length();
                seg += 1;
            }
            let len = self.segments[seg].length();
            out.push(self.segments[seg].point(((s - before) / len).clamp(0.0, 1.0)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Contour {
    Circle(ContourCircle),
    Piecewise(PiecewiseContour),
}

impl From<ContourCircle> for Contour {
    fn from(c: ContourCircle) -> Self {
        Contour::Circle(c)
    }
}

impl From<PiecewiseContour> for Contour {
    fn from(c: PiecewiseContour) -> Self {
        Contour::Piecewise(c)
    }
}

/// Discretization of a contour; weights absorb dz/(2πi) and the orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadGrid {
    pub nodes: Vec<C64>,
    pub weights: Vec<C64>,
    pub refinement_level: usize,
}

impl QuadGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ w f(z) with compensated summation.
    pub fn integrate(&self, f: impl Fn(C64) -> C64) -> C64 {
        let terms: Vec<C64> = self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).collect();
        super::pairwise_sum(&terms)
    }
}

impl Contour {
    /// Trapezoidal rule with `m` equispaced angles on circles; composite
    /// 16-point Gauss–Legendre on piecewise contours, with about `m / 16`
    /// panels spread over the segments by length.
    pub fn discretize(&self, m: usize) -> Result<QuadGrid> {
        if m < 8 {
            return Err(Error::InvalidInput(format!("node count {m} below 8")));
        }
        match self {
            Contour::Circle(c) => {
                let mut nodes = Vec::with_capacity(m);
                let mut weights = Vec::with_capacity(m);
                let sign = c.orientation.sign();
                for k in 0..m {
                    let u = C64::from_polar(c.radius, 2.0 * PI * k as f64 / m as f64);
                    nodes.push(c.center + u);
                    weights.push(u * (sign / m as f64));
                }
                Ok(QuadGrid { nodes, weights, refinement_level: m })
            }
            Contour::Piecewise(p) => {
                let (gx, gw) = gauss_legendre(PANEL_POINTS);
                let total = p.length();
                let panels_total = (m as f64 / PANEL_POINTS as f64).max(1.0);
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                for seg in p.segments() {
                    let k = ((panels_total * seg.length() / total).ceil() as usize).max(1);
                    for j in 0..k {
                        let a = j as f64 / k as f64;
                        let h = 1.0 / k as f64;
                        for (x, w) in gx.iter().zip(&gw) {
                            let s = a + h * (x + 1.0) / 2.0;
                            nodes.push(seg.point(s));
                            weights.push(seg.derivative(s) * (w * h / 2.0) / TWO_PI_I);
                        }
                    }
                }
                Ok(QuadGrid { nodes, weights, refinement_level: m })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_weights_sum_residue() {
        for orient in [Orientation::Positive, Orientation::Negative] {
            let c = ContourCircle::new(C64::new(0.3, -0.2), 0.7, orient).unwrap();
            let g = Contour::from(c).discretize(32).unwrap();
            let r = g.integrate(|z| 1.0 / (z - c.center));
            assert!((r - orient.sign()).norm() < 1e-12);
        }
    }

    #[test]
    fn square_contour_matches_circle() {
        let p = [C64::new(1.0, -1.0), C64::new(1.0, 1.0), C64::new(-1.0, 1.0), C64::new(-1.0, -1.0)];
        let segs = (0..4).map(|k| Segment::line(p[k], p[(k + 1) % 4])).collect();
        let sq = Contour::from(PiecewiseContour::closed(segs).unwrap());
        let g = sq.discretize(256).unwrap();
        let f = |z: C64| z.exp() / (z - 0.2);
        let expect = C64::new(0.2f64.exp(), 0.0);
        assert!((g.integrate(f) - expect).norm() < 1e-12);
    }

    #[test]
    fn rejects_open_or_degenerate() {
        let a = C64::new(0.0, 0.0);
        let b = C64::new(1.0, 0.0);
        assert!(PiecewiseContour::closed(vec![Segment::line(a, b)]).is_err());
        assert!(PiecewiseContour::path(vec![Segment::line(a, a)]).is_err());
        assert!(ContourCircle::centered(0.0).is_err());
    }

    #[test]
    fn arc_conj_and_negation_map_points() {
        let s = Segment::arc(C64::new(0.0, 1.0), 0.5, 0.1, 2.0);
        for t in [0.0, 0.3, 1.0] {
            assert!((s.conj().point(t) - s.point(t).conj()).norm() < 1e-15);
            assert!((s.negated().point(t) + s.point(t)).norm() < 1e-15);
        }
    }
}
