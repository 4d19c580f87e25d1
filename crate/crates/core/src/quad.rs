//! Deterministic Gauss–Legendre quadrature on the real line and the upper
//! half-plane, the complementary error function, and parameter validation.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::moments::EnsembleKind;
use crate::symfun::CouplingSeq;

/// Default number of Gauss–Legendre nodes per panel.
pub const DEFAULT_ORDER: usize = 16;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_LEVEL: u32 = 4;

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Gauss–Legendre nodes and weights on [−1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Cached rule of the default order.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(DEFAULT_ORDER))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Appends the rule mapped onto [a, b].
    pub fn push_interval(&self, a: f64, b: f64, nodes: &mut Vec<f64>, weights: &mut Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    RealLine,
    HalfPlane,
    Plane,
}

/// Target relative error and subdivision depth of a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub tol: f64,
    pub level: u32,
}

/// Panel structure on an interval; level k splits every panel into 2ᵏ pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelLayout {
    breakpoints: Vec<f64>,
}

impl PanelLayout {
    pub fn uniform(a: f64, b: f64, panels: usize) -> Self {
        let panels = panels.max(1);
        let breakpoints = (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect();
        Self { breakpoints }
    }

    /// Symmetric panels on [−X, X]; with `graded`, panels refine
    /// geometrically towards 0 down to `inner` and [−inner, inner] is split at 0.
    pub fn real_line(half_width: f64, graded: Option<f64>) -> Self {
        let mut right = vec![0.0];
        let outer_start = match graded {
            Some(inner) => {
                let mut x = inner.max(1e-12);
                while x < 1.0 {
                    right.push(x);
                    x *= 2.0;
                }
                1.0
            }
            None => 0.0,
        };
        let span = half_width - outer_start;
        let panels = (span / 1.5).ceil().max(1.0) as usize;
        for i in 1..=panels {
            right.push(outer_start + span * i as f64 / panels as f64);
        }
        if graded.is_none() {
            right.retain(|&x| x > 0.0);
            let mut bp: Vec<f64> = right.iter().rev().map(|x| -x).collect();
            bp.push(0.0);
            bp.extend(right);
            return Self { breakpoints: bp };
        }
        let mut bp: Vec<f64> = right.iter().skip(1).rev().map(|x| -x).collect();
        bp.extend(right);
        Self { breakpoints: bp }
    }

    pub fn lo(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Rule over the whole layout at the given level.
    pub fn rule(&self, rule: &GaussLegendre, level: u32) -> (Vec<f64>, Vec<f64>) {
        self.rule_on(rule, self.lo(), self.hi(), level)
    }

    /// Rule over [a, b] ∩ layout, using the layout's panels clipped to [a, b].
    pub fn rule_on(&self, rule: &GaussLegendre, a: f64, b: f64, level: u32) -> (Vec<f64>, Vec<f64>) {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let split = 1usize << level;
        for w in self.breakpoints.windows(2) {
            let (lo, hi) = (w[0].max(a), w[1].min(b));
            if hi <= lo {
                continue;
            }
            let full = hi - lo >= (w[1] - w[0]) * (1.0 - 1e-12);
            let pieces = if full { split } else { (((hi - lo) / (w[1] - w[0]) * split as f64).ceil() as usize).max(1) };
            for k in 0..pieces {
                let x0 = lo + (hi - lo) * k as f64 / pieces as f64;
                let x1 = lo + (hi - lo) * (k + 1) as f64 / pieces as f64;
                rule.push_interval(x0, x1, &mut nodes, &mut weights);
            }
        }
        (nodes, weights)
    }
}

/// Nodes and positive weights discretizing dx or d²z.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub domain: Domain,
    pub nodes: Vec<C64>,
    pub weights: Vec<f64>,
    pub resolution: Resolution,
}

impl QuadratureGrid {
    pub fn real_line(layout: &PanelLayout, resolution: Resolution) -> Self {
        let (x, w) = layout.rule(GaussLegendre::standard(), resolution.level);
        Self { domain: Domain::RealLine, nodes: x.into_iter().map(|v| C64::new(v, 0.0)).collect(), weights: w, resolution }
    }

    /// Tensor grid over re × im; `im` must lie in (0, ∞) for the half-plane.
    pub fn tensor(re: &PanelLayout, im: &PanelLayout, resolution: Resolution) -> Self {
        let rule = GaussLegendre::standard();
        let (xr, wr) = re.rule(rule, resolution.level);
        let (xi, wi) = im.rule(rule, resolution.level);
        let mut nodes = Vec::with_capacity(xr.len() * xi.len());
        let mut weights = Vec::with_capacity(xr.len() * xi.len());
        for (a, wa) in xr.iter().zip(&wr) {
            for (b, wb) in xi.iter().zip(&wi) {
                nodes.push(C64::new(*a, *b));
                weights.push(wa * wb);
            }
        }
        let domain = if im.lo() >= 0.0 { Domain::HalfPlane } else { Domain::Plane };
        Self { domain, nodes, weights, resolution }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sum<F: Fn(C64) -> C64>(&self, f: F) -> (C64, f64) {
        let mut acc = crate::linalg::CompensatedSum::default();
        let mut abs = 0.0;
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(*z) * *w;
            abs += v.norm();
            acc.add(v);
        }
        (acc.value(), abs)
    }
}

/// Refined integral with the last refinement delta as error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: C64,
    pub error: f64,
    pub level: u32,
}

/// Vector of refined integrals.
#[derive(Clone, Debug)]
pub struct Refined {
    pub values: Vec<C64>,
    pub errors: Vec<f64>,
    pub level: u32,
}

impl Refined {
    /// Largest error relative to the L1 scale of each entry.
    pub fn max_relative_error(&self, scales: &[f64]) -> f64 {
        self.errors.iter().zip(scales).map(|(e, s)| if *s > 0.0 { e / s } else { *e }).fold(0.0, f64::max)
    }
}

/// Repeats `eval(level)` with doubled panels until every entry changes by
/// less than `tol` times its L1 scale. `eval` returns (value, ∫|f|) pairs.
pub fn refine<F>(mut eval: F, tol: f64, max_level: u32) -> Result<Refined>
where
    F: FnMut(u32) -> Vec<(C64, f64)>,
{
    let mut prev = eval(0);
    let mut residual = f64::INFINITY;
    for level in 1..=max_level {
        let cur = eval(level);
        let errors: Vec<f64> = cur.iter().zip(&prev).map(|(c, p)| (c.0 - p.0).norm()).collect();
        residual = errors
            .iter()
            .zip(&cur)
            .map(|(e, c)| if c.1 > 0.0 { e / c.1 } else { *e })
            .fold(0.0, f64::max);
        if residual <= tol {
            return Ok(Refined { values: cur.iter().map(|c| c.0).collect(), errors, level });
        }
        prev = cur;
    }
    Err(Error::NoConvergence { estimate: prev.first().map_or(C64::new(0.0, 0.0), |c| c.0), residual })
}

/// Placement of panels for a weight e^{−c x²} times moments up to degree
/// `max_power`, optionally singular at 0 with e^{−s x^{−d}}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealWeightShape {
    pub gauss: f64,
    pub max_power: usize,
    pub shift: f64,
    /// (coefficient, degree) of the leading s-term, if any.
    pub singular: Option<(f64, usize)>,
}

impl RealWeightShape {
    pub fn layout(&self) -> PanelLayout {
        let c = self.gauss.max(0.05);
        let half_width = ((self.max_power as f64 + 90.0) / c).sqrt() + self.shift.abs() + 1.0;
        let graded = self.singular.map(|(coef, deg)| 0.5 * (coef / 750.0).powf(1.0 / deg as f64));
        PanelLayout::real_line(half_width, graded)
    }
}

/// ∫_ℝ f dx with refinement.
pub fn integrate_real<F: Fn(f64) -> C64>(f: F, layout: &PanelLayout, tol: f64) -> Result<Estimate> {
    let r = refine(
        |level| {
            let g = QuadratureGrid::real_line(layout, Resolution { tol, level });
            vec![g.sum(|z| f(z.re))]
        },
        tol,
        DEFAULT_MAX_LEVEL + 2,
    )?;
    Ok(Estimate { value: r.values[0], error: r.errors[0], level: r.level })
}

/// Default layout pair for the upper half-plane under a Gaussian weight.
pub fn halfplane_layout(max_power: usize, gauss: f64) -> (PanelLayout, PanelLayout) {
    let c = gauss.max(0.05);
    let r = ((max_power as f64 + 90.0) / c).sqrt() + 1.0;
    let panels = (r / 1.5).ceil() as usize;
    (PanelLayout::uniform(-r, r, 2 * panels), PanelLayout::uniform(0.0, r, panels))
}

/// ∫_{Im z > 0} f d²z with refinement.
pub fn integrate_halfplane<F: Fn(C64) -> C64>(f: F, re: &PanelLayout, im: &PanelLayout, tol: f64) -> Result<Estimate> {
    let r = refine(
        |level| {
            let g = QuadratureGrid::tensor(re, im, Resolution { tol, level });
            vec![g.sum(&f)]
        },
        tol,
        DEFAULT_MAX_LEVEL,
    )?;
    Ok(Estimate { value: r.values[0], error: r.errors[0], level: r.level })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectionCode {
    GrowthAtInfinity,
    SingularAtZero,
    PoleAtZero,
    ComplexSectorDeformation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub code: RejectionCode,
    pub reason: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.reason)
    }
}

fn reject(code: RejectionCode, reason: String) -> std::result::Result<(), Rejection> {
    Err(Rejection { code, reason })
}

/// Real-line sector with exponent −c x² + f·V(x,t) − f·V(1/x,s) and x^{f·L}.
fn validate_real(gauss: f64, factor: f64, t: &CouplingSeq, s: &CouplingSeq, l: i64) -> std::result::Result<(), Rejection> {
    let d = t.degree();
    if d >= 3 {
        if d % 2 == 1 {
            return reject(RejectionCode::GrowthAtInfinity, format!("odd top degree {d} of t grows at infinity"));
        }
        if t.get(d) >= 0.0 {
            return reject(RejectionCode::GrowthAtInfinity, format!("top coefficient t_{d} must be negative"));
        }
    } else if -gauss + factor * t.get(2) >= 0.0 {
        return reject(RejectionCode::GrowthAtInfinity, format!("quadratic coefficient {} is not negative", -gauss + factor * t.get(2)));
    }
    let e = s.degree();
    if e > 0 {
        if e % 2 == 1 {
            return reject(RejectionCode::SingularAtZero, format!("odd top index {e} of s blows up on one side of 0"));
        }
        if s.get(e) <= 0.0 {
            return reject(RejectionCode::SingularAtZero, format!("top coefficient s_{e} must be positive"));
        }
    } else if l < 0 {
        return reject(RejectionCode::PoleAtZero, format!("L = {l} needs s to damp the pole at 0"));
    }
    Ok(())
}

/// Complex sector with exponent −|z|² + 2 Re V(z,t): only t₁, t₂ allowed.
fn validate_complex(t: &CouplingSeq, s: &CouplingSeq, l: i64) -> std::result::Result<(), Rejection> {
    if t.degree() >= 3 {
        return reject(RejectionCode::ComplexSectorDeformation, "complex sectors admit only t_1 and t_2".into());
    }
    let t2 = t.get(2);
    if -1.0 + 2.0 * t2 >= 0.0 || -1.0 - 2.0 * t2 >= 0.0 {
        return reject(RejectionCode::GrowthAtInfinity, format!("|t_2| = {} must be below 1/2 in the complex plane", t2.abs()));
    }
    if !s.is_zero() {
        return reject(RejectionCode::ComplexSectorDeformation, "s must vanish for complex sectors".into());
    }
    if l < 0 {
        return reject(RejectionCode::PoleAtZero, format!("L = {l} is not integrable in the plane"));
    }
    Ok(())
}

/// Sufficient decay conditions for the eigenvalue integrals of `kind`.
pub fn convergence_validate(kind: EnsembleKind, t: &CouplingSeq, s: &CouplingSeq, l: i64) -> std::result::Result<(), Rejection> {
    match kind {
        EnsembleKind::OE => validate_real(0.5, 1.0, t, s, l),
        EnsembleKind::GinOE => {
            validate_real(0.5, 1.0, t, s, l)?;
            validate_complex(t, s, l)
        }
        EnsembleKind::SE => validate_real(1.0, 2.0, t, s, l),
        EnsembleKind::GinSE | EnsembleKind::GinUE => validate_complex(t, s, l),
    }
}

/// Complex Ginibre weight z^{L1} z̄^{−L2} e^{V(z,t)+V(z̄,t')−V(1/z,s)−V(1/z̄,s')−|z|²}.
pub fn convergence_validate_plane(
    t: &CouplingSeq,
    t_bar: &CouplingSeq,
    s: &CouplingSeq,
    s_bar: &CouplingSeq,
    l1: i64,
    l2: i64,
) -> std::result::Result<(), Rejection> {
    if t.degree() >= 3 || t_bar.degree() >= 3 {
        return reject(RejectionCode::ComplexSectorDeformation, "complex sectors admit only t_1 and t_2".into());
    }
    let q = t.get(2) + t_bar.get(2);
    if q.abs() >= 1.0 {
        return reject(RejectionCode::GrowthAtInfinity, format!("|t_2 + t'_2| = {} must be below 1", q.abs()));
    }
    if !s.add(s_bar).is_zero() {
        return reject(RejectionCode::ComplexSectorDeformation, "s + s' must vanish in the plane".into());
    }
    if l1 < 0 || l2 > 0 {
        return reject(RejectionCode::PoleAtZero, format!("need L1 >= 0 and L2 <= 0, got ({l1}, {l2})"));
    }
    Ok(())
}
