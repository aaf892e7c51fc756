//! Closed-form conformal test maps: Möbius transformations, the quadratic
//! family `z + c z²`, and finite compositions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::geometry::{CurveSource, JordanCurve};
use crate::{Error, Result, C64};

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_ITERS: usize = 50;

/// A conformal map with exact derivatives and inverse.
///
/// `Composition(vec![f1, f2, ...])` applies `f1` first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub enum ConformalTestMap {
    Mobius { a: C64, b: C64, c: C64, d: C64 },
    /// `z + c z²`, declared on the disk of radius `1/domain_r`.
    Quadratic { c: C64, domain_r: f64 },
    Composition(Vec<ConformalTestMap>),
}

impl ConformalTestMap {
    pub fn mobius(a: C64, b: C64, c: C64, d: C64) -> Result<Self> {
        if (a * d - b * c).norm() < 1e-14 {
            return Err(Error::MapConstruction("Möbius determinant vanishes".into()));
        }
        Ok(Self::Mobius { a, b, c, d })
    }

    pub fn identity() -> Self {
        Self::affine(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    }

    /// `z ↦ a z + b`.
    pub fn affine(a: C64, b: C64) -> Self {
        Self::Mobius { a, b, c: C64::new(0.0, 0.0), d: C64::new(1.0, 0.0) }
    }

    /// `z ↦ z + c z²` on the disk of radius `1/domain_r`; requires `|c| < domain_r / 2`.
    pub fn quadratic(c: C64, domain_r: f64) -> Result<Self> {
        if !(domain_r > 0.0 && domain_r <= 1.0) {
            return Err(Error::MapConstruction(format!("domain_r = {domain_r} not in (0,1]")));
        }
        if c.norm() >= domain_r / 2.0 {
            return Err(Error::MapConstruction(format!(
                "|c| = {} violates the injectivity bound {}",
                c.norm(),
                domain_r / 2.0
            )));
        }
        Ok(Self::Quadratic { c, domain_r })
    }

    /// Quadratic map with the widest declared disk allowed by the injectivity bound
    /// (up to a 1% margin), capped at radius 2.
    pub fn quadratic_auto(c: C64) -> Result<Self> {
        let r = (2.02 * c.norm()).max(0.5);
        Self::quadratic(c, r.min(1.0))
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &ConformalTestMap) -> Self {
        let mut parts = Vec::new();
        for m in [self, next] {
            match m {
                Self::Composition(v) => parts.extend(v.iter().cloned()),
                other => parts.push(other.clone()),
            }
        }
        Self::Composition(parts)
    }

    pub fn is_mobius(&self) -> bool {
        match self {
            Self::Mobius { .. } => true,
            Self::Quadratic { c, .. } => *c == C64::new(0.0, 0.0),
            Self::Composition(v) => v.iter().all(|m| m.is_mobius()),
        }
    }

    fn in_domain(&self, z: C64) -> bool {
        match self {
            Self::Mobius { c, d, .. } => (c * z + d).norm() > 1e-300 && z.re.is_finite() && z.im.is_finite(),
            Self::Quadratic { domain_r, .. } => z.norm() <= 1.0 / domain_r * (1.0 + 1e-12),
            Self::Composition(_) => true,
        }
    }

    /// `f(z)`, `f'(z)`, `f''(z)` at once, without domain checks.
    pub fn jet(&self, z: C64) -> [C64; 3] {
        match self {
            Self::Mobius { a, b, c, d } => {
                let den = c * z + d;
                let det = a * d - b * c;
                let f1 = det / (den * den);
                [(a * z + b) / den, f1, -2.0 * c * f1 / den]
            }
            Self::Quadratic { c, .. } => [z + c * z * z, 1.0 + 2.0 * c * z, 2.0 * c],
            Self::Composition(v) => {
                let mut j = [z, C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
                for m in v {
                    let [g0, g1, g2] = m.jet(j[0]);
                    j = [g0, g1 * j[1], g2 * j[1] * j[1] + g1 * j[2]];
                }
                j
            }
        }
    }

    pub fn eval_unchecked(&self, z: C64, order: usize) -> C64 {
        self.jet(z)[order.min(2)]
    }

    /// `f(z)`, `f'(z)` or `f''(z)` for `order` 0, 1, 2.
    pub fn eval(&self, z: C64, order: usize) -> Result<C64> {
        if order > 2 {
            return Err(Error::InvalidArgument(format!("derivative order {order} not supported")));
        }
        let mut j = [z, C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        for m in self.stages() {
            if !m.in_domain(j[0]) {
                return Err(Error::OutsideMapDomain);
            }
            let [g0, g1, g2] = m.jet(j[0]);
            j = [g0, g1 * j[1], g2 * j[1] * j[1] + g1 * j[2]];
        }
        Ok(j[order])
    }

    fn stages(&self) -> Vec<&ConformalTestMap> {
        match self {
            Self::Composition(v) => v.iter().flat_map(|m| m.stages()).collect(),
            other => vec![other],
        }
    }

    /// Preimage of `w`; `hint` selects among branches where that is ambiguous.
    pub fn invert(&self, w: C64, hint: Option<C64>) -> Result<C64> {
        let stages = self.stages();
        let mut z = w;
        for (k, m) in stages.iter().enumerate().rev() {
            // the hint lives in the source plane; push it forward to this stage
            let h = hint.map(|h| stages[..k].iter().fold(h, |acc, s| s.eval_unchecked(acc, 0)));
            z = m.invert_stage(z, h)?;
        }
        let _ = self.eval(z, 0).map_err(|_| Error::InversionFailed)?;
        Ok(z)
    }

    fn invert_stage(&self, w: C64, hint: Option<C64>) -> Result<C64> {
        match self {
            Self::Mobius { a, b, c, d } => {
                let den = a - c * w;
                if den.norm() < 1e-300 {
                    return Err(Error::InversionFailed);
                }
                Ok((d * w - b) / den)
            }
            Self::Quadratic { c, domain_r } => {
                let big_r = 1.0 / domain_r;
                if c.norm() == 0.0 {
                    return if w.norm() <= big_r { Ok(w) } else { Err(Error::InversionFailed) };
                }
                let s = (1.0 + 4.0 * c * w).sqrt();
                let roots = [(-1.0 + s) / (2.0 * c), (-1.0 - s) / (2.0 * c)];
                let mut best = roots
                    .into_iter()
                    .filter(|z| z.norm() <= big_r * (1.0 + 1e-12))
                    .min_by(|x, y| {
                        let key = |z: &C64| hint.map_or(z.norm(), |h| (z - h).norm());
                        key(x).total_cmp(&key(y))
                    })
                    .ok_or(Error::InversionFailed)?;
                for _ in 0..NEWTON_ITERS {
                    let step = (best + c * best * best - w) / (1.0 + 2.0 * c * best);
                    best -= step;
                    if step.norm() <= NEWTON_TOL * (1.0 + best.norm()) * 1e-3 {
                        break;
                    }
                }
                Ok(best)
            }
            Self::Composition(_) => self.invert(w, hint),
        }
    }

    /// Preimage of `w` for region-membership tests: a preimage outside the
    /// declared domain means `w` is not in the image.
    pub fn invert_in_annulus(&self, w: C64, _r: f64, hint: Option<C64>) -> Result<C64> {
        match self.invert(w, hint) {
            Ok(z) => Ok(z),
            Err(Error::InversionFailed) => Err(Error::OutsideMapDomain),
            Err(e) => Err(e),
        }
    }

    /// Checks that the closure of the round annulus `r ≤ |z| ≤ 1/r` lies in the
    /// declared domain and that the image is bounded.
    pub fn check_injective_on_annulus(&self, r: f64) -> Result<()> {
        let outer = 1.0 / r;
        let n = 720;
        for k in 0..n {
            let t = 2.0 * PI * k as f64 / n as f64;
            for rad in [r, 1.0, outer] {
                let z = C64::from_polar(rad, t);
                let w = self.eval(z, 0).map_err(|_| {
                    Error::MapConstruction(format!("annulus of parameter {r} leaves the map domain"))
                })?;
                if !(w.norm() < 1e8) {
                    return Err(Error::MapConstruction("image of annulus is unbounded".into()));
                }
            }
        }
        // a Möbius pole inside the disk of radius 1/r would send part of the annulus or its core to ∞
        self.check_poles_outside(outer)
    }

    fn check_poles_outside(&self, radius: f64) -> Result<()> {
        // pull each Möbius pole back to the source plane and require it outside the disk
        let stages = self.stages();
        for (k, m) in stages.iter().enumerate() {
            if let Self::Mobius { c, d, .. } = m {
                if c.norm() == 0.0 {
                    continue;
                }
                let pole = -d / c;
                let prefix = Self::Composition(stages[..k].iter().map(|s| (*s).clone()).collect());
                if let Ok(z) = prefix.invert(pole, None) {
                    if z.norm() <= radius * (1.0 + 1e-9) {
                        return Err(Error::MapConstruction("Möbius pole inside the declared region".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Image of a curve, refined so that image edges do not exceed `max_edge`
    /// (default 1/256 of the image diameter).
    pub fn push_curve(&self, curve: &JordanCurve, max_edge: Option<f64>) -> Result<JordanCurve> {
        let n = curve.len();
        let src = curve.source();
        let point_at = |k: usize, s: f64| -> C64 {
            // position of parameter s in [0,1] along edge k in the source plane
            let a = curve.vertices()[k];
            let b = curve.vertices()[(k + 1) % n];
            match src {
                Some(cs) => {
                    let t0 = cs.params[k];
                    let mut t1 = cs.params[(k + 1) % n];
                    if k + 1 == n {
                        t1 += 2.0 * PI * (cs.params[n - 1] - cs.params[0]).signum();
                    }
                    cs.map.eval_unchecked(C64::from_polar(1.0, t0 + s * (t1 - t0)), 0)
                }
                None => a + (b - a) * s,
            }
        };
        let images: Vec<C64> = curve.vertices().iter().map(|&z| self.eval(z, 0)).collect::<Result<_>>()?;
        let diam = bbox_diameter(&images);
        // without an explicit bound, only edges stretched beyond the input resolution are split
        let input_edge = (0..n)
            .map(|k| (curve.vertices()[(k + 1) % n] - curve.vertices()[k]).norm())
            .fold(0.0, f64::max);
        let stretch = diam / bbox_diameter(curve.vertices());
        let max_edge = max_edge.unwrap_or((diam / 256.0).max(1.5 * input_edge * stretch));
        let mut vertices = Vec::with_capacity(n);
        let mut params = Vec::with_capacity(n);
        let mut root = 0;
        for k in 0..n {
            if k == curve.root() {
                root = vertices.len();
            }
            let next = images[(k + 1) % n];
            let mut pieces = 1usize;
            loop {
                let mut prev = images[k];
                let mut ok = true;
                for j in 1..=pieces {
                    let w = if j == pieces { next } else { self.eval(point_at(k, j as f64 / pieces as f64), 0)? };
                    if (w - prev).norm() > max_edge {
                        ok = false;
                        break;
                    }
                    prev = w;
                }
                if ok || pieces >= 1 << 12 {
                    break;
                }
                pieces *= 2;
            }
            for j in 0..pieces {
                let s = j as f64 / pieces as f64;
                vertices.push(if j == 0 { images[k] } else { self.eval(point_at(k, s), 0)? });
                if let Some(cs) = src {
                    let t0 = cs.params[k];
                    let mut t1 = cs.params[(k + 1) % n];
                    if k + 1 == n {
                        t1 += 2.0 * PI * (cs.params[n - 1] - cs.params[0]).signum();
                    }
                    params.push(t0 + s * (t1 - t0));
                }
            }
        }
        let out = JordanCurve::new(vertices, root)?;
        Ok(match src {
            Some(cs) => out.with_source(CurveSource { map: cs.map.then(self), params }),
            None => out,
        })
    }
}

fn bbox_diameter(pts: &[C64]) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in pts {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    (x1 - x0).hypot(y1 - y0)
}

fn complex_json(z: C64) -> Value {
    json!([z.re, z.im])
}

fn complex_from(v: &Value) -> std::result::Result<C64, String> {
    let arr = v.as_array().ok_or("complex number must be an array [re] or [re, im]")?;
    let get = |i: usize| -> std::result::Result<f64, String> {
        arr.get(i).map_or(Ok(0.0), |x| x.as_f64().ok_or_else(|| "non-numeric component".to_string()))
    };
    if arr.is_empty() || arr.len() > 2 {
        return Err("complex number must have one or two components".into());
    }
    Ok(C64::new(get(0)?, get(1)?))
}

impl From<ConformalTestMap> for Value {
    fn from(m: ConformalTestMap) -> Value {
        match m {
            ConformalTestMap::Mobius { a, b, c, d } => json!({
                "variant": "mobius",
                "coeffs": [complex_json(a), complex_json(b), complex_json(c), complex_json(d)],
            }),
            ConformalTestMap::Quadratic { c, domain_r } => json!({
                "variant": "quadratic",
                "c": complex_json(c),
                "domain_r": domain_r,
            }),
            ConformalTestMap::Composition(v) => Value::Array(v.into_iter().map(Value::from).collect()),
        }
    }
}

impl TryFrom<Value> for ConformalTestMap {
    type Error = String;

    fn try_from(v: Value) -> std::result::Result<Self, String> {
        if let Value::Array(items) = v {
            let maps = items.into_iter().map(Self::try_from).collect::<std::result::Result<_, _>>()?;
            return Ok(Self::Composition(maps));
        }
        let variant = v.get("variant").and_then(Value::as_str).ok_or("missing \"variant\"")?;
        match variant {
            "mobius" => {
                let coeffs = v.get("coeffs").and_then(Value::as_array).ok_or("missing \"coeffs\"")?;
                if coeffs.len() != 4 {
                    return Err("\"coeffs\" must have four entries".into());
                }
                let c: Vec<C64> = coeffs.iter().map(complex_from).collect::<std::result::Result<_, _>>()?;
                Self::mobius(c[0], c[1], c[2], c[3]).map_err(|e| e.to_string())
            }
            "quadratic" => {
                let c = complex_from(v.get("c").ok_or("missing \"c\"")?)?;
                match v.get("domain_r") {
                    Some(r) => Self::quadratic(c, r.as_f64().ok_or("\"domain_r\" must be a number")?),
                    None => Self::quadratic_auto(c),
                }
                .map_err(|e| e.to_string())
            }
            "identity" => Ok(Self::identity()),
            other => Err(format!("unknown map variant {other:?}")),
        }
    }
}

impl std::str::FromStr for ConformalTestMap {
    type Err = String;

    /// Short forms `identity`, `quadratic:<c>`, `scale:<s>`, or a JSON document.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "identity" {
            return Ok(Self::identity());
        }
        if let Some(c) = s.strip_prefix("quadratic:") {
            let c: f64 = c.parse().map_err(|_| format!("bad quadratic coefficient {c:?}"))?;
            return Self::quadratic_auto(C64::new(c, 0.0)).map_err(|e| e.to_string());
        }
        if let Some(k) = s.strip_prefix("scale:") {
            let k: f64 = k.parse().map_err(|_| format!("bad scale {k:?}"))?;
            return Ok(Self::affine(C64::new(k, 0.0), C64::new(0.0, 0.0)));
        }
        let v: Value = serde_json::from_str(s).map_err(|e| e.to_string())?;
        Self::try_from(v)
    }
}
