// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! The upper half-plane model of the hyperbolic plane.

use serde::{Deserialize, Serialize};

use super::{BoundarySpace, FixedPoints, Group, Space};
use crate::{Error, Result};

/// Default hyperbolicity constant used for the half-plane backends. It is an
/// empirical upper bound checked by quadruple sampling, see the tests below.
pub const DEFAULT_DELTA: f64 = 0.75;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

const DET_TOLERANCE: f64 = 1e-9;
const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperHalfPoint {
    pub x: f64,
    pub y: f64,
}

impl UpperHalfPoint {
    /// The basepoint `i`.
    pub const I: UpperHalfPoint = UpperHalfPoint { x: 0.0, y: 1.0 };

    pub fn new(x: f64, y: f64) -> Result<UpperHalfPoint> {
        if !(x.is_finite() && y.is_finite() && y > 0.0) {
            return Err(Error::NumericDomain(format!("({x}, {y}) is not in the upper half-plane")));
        }
        Ok(UpperHalfPoint { x, y })
    }

    /// The point at distance `r` from `i` in the direction making angle
    /// `theta` with the upward vertical.
    pub fn polar(r: f64, theta: f64) -> UpperHalfPoint {
        let p = UpperHalfPoint { x: 0.0, y: r.exp() };
        moebius_act(&MoebiusIsometry::rotation(theta), &p).expect("rotations are nondegenerate")
    }
}

/// Hyperbolic distance. Uses `2 asinh(|p − q| / (2 √(p.y q.y)))`, which equals
/// the arccosh form and stays accurate for nearby points.
pub fn h2_dist(p: &UpperHalfPoint, q: &UpperHalfPoint) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    2.0 * ((dx * dx + dy * dy).sqrt() / (2.0 * (p.y * q.y).sqrt())).asinh()
}

/// `z ↦ (az + b)/(cz + d)` with real entries and determinant one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoebiusIsometry {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MoebiusIsometry {
    pub const IDENTITY: MoebiusIsometry = MoebiusIsometry { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<MoebiusIsometry> {
        let g = MoebiusIsometry { a, b, c, d };
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::NumericDomain("non-finite matrix entry".into()));
        }
        // The computed determinant of a matrix with large entries is only
        // known up to the rounding noise of `ad − bc`.
        let noise = 64.0 * f64::EPSILON * ((a * d).abs() + (b * c).abs());
        if (g.det() - 1.0).abs() > DET_TOLERANCE.max(noise) {
            return Err(Error::NumericDomain(format!("determinant {} is not 1", g.det())));
        }
        Ok(g)
    }

    /// Rescales a matrix of positive determinant to determinant one.
    pub fn normalized(a: f64, b: f64, c: f64, d: f64) -> Result<MoebiusIsometry> {
        let det = a * d - b * c;
        if !(det > 0.0 && det.is_finite()) {
            return Err(Error::NumericDomain(format!("determinant {det} is not positive")));
        }
        let s = det.sqrt().recip();
        MoebiusIsometry::new(a * s, b * s, c * s, d * s)
    }

    /// `diag(λ, 1/λ)`, translation by `2 ln λ` along the imaginary axis.
    pub fn diag(lambda: f64) -> MoebiusIsometry {
        MoebiusIsometry { a: lambda, b: 0.0, c: 0.0, d: lambda.recip() }
    }

    /// Rotation about `i` by the angle `theta` in the tangent plane. The
    /// matrix carries the half angle.
    pub fn rotation(theta: f64) -> MoebiusIsometry {
        let (s, c) = (theta / 2.0).sin_cos();
        MoebiusIsometry { a: c, b: s, c: -s, d: c }
    }

    /// Translation of length `length` along the geodesic through `i` whose
    /// direction makes angle `theta` with the upward vertical.
    pub fn transvection(length: f64, theta: f64) -> MoebiusIsometry {
        let r = MoebiusIsometry::rotation(theta);
        r.mul(&MoebiusIsometry::diag((length / 2.0).exp())).mul(&r.inv())
    }

    /// The affine map `z ↦ y z + x` sending `i` to `p = x + iy`.
    pub fn sending_i_to(p: &UpperHalfPoint) -> MoebiusIsometry {
        let s = p.y.sqrt();
        MoebiusIsometry { a: s, b: p.x / s, c: 0.0, d: s.recip() }
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// Matrix product `self · other`.
    #[inline]
    pub fn mul(&self, o: &MoebiusIsometry) -> MoebiusIsometry {
        MoebiusIsometry {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    #[inline]
    pub fn inv(&self) -> MoebiusIsometry {
        MoebiusIsometry { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Squared Frobenius norm; `cosh d(i, g·i) = ‖g‖²/2`.
    #[inline]
    pub fn frobenius_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn translation_length(&self) -> f64 {
        let t = self.trace().abs() / 2.0;
        if t <= 1.0 {
            0.0
        } else {
            2.0 * t.acosh()
        }
    }

    pub fn act(&self, p: &UpperHalfPoint) -> Result<UpperHalfPoint> {
        moebius_act(self, p)
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

pub fn moebius_act(g: &MoebiusIsometry, p: &UpperHalfPoint) -> Result<UpperHalfPoint> {
    // (a z + b)(c z̄ + d) / |c z + d|²
    let den_re = g.c * p.x + g.d;
    let den_im = g.c * p.y;
    let den = den_re * den_re + den_im * den_im;
    // For entries of size e^L the denominator can legitimately be of size
    // e^{-L/2}, so the floor shrinks with the matrix.
    let floor = DENOMINATOR_FLOOR / g.frobenius_sq().max(1.0);
    if !(den.sqrt() >= floor) {
        return Err(Error::NumericDomain("degenerate denominator in Moebius action".into()));
    }
    let num_re = g.a * p.x + g.b;
    let num_im = g.a * p.y;
    let x = (num_re * den_re + num_im * den_im) / den;
    // Im(gz) = det · Im(z)/|cz + d|² with det = 1, free of cancellation.
    let y = p.y / den;
    UpperHalfPoint::new(x, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsometryClass {
    Elliptic,
    Parabolic,
    Loxodromic,
}

pub fn classify_isometry(g: &MoebiusIsometry, tol: f64) -> IsometryClass {
    let t = g.trace().abs();
    if t > 2.0 + tol {
        IsometryClass::Loxodromic
    } else if (t - 2.0).abs() <= tol {
        IsometryClass::Parabolic
    } else {
        IsometryClass::Elliptic
    }
}

/// A point of `ℝ ∪ {∞}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryPoint {
    Finite(f64),
    Infinity,
}

impl BoundaryPoint {
    /// Image on the unit circle under the Cayley map `z ↦ (z − i)/(z + i)`,
    /// which sends `i` to the centre of the disk.
    pub fn on_circle(&self) -> (f64, f64) {
        match *self {
            BoundaryPoint::Infinity => (1.0, 0.0),
            BoundaryPoint::Finite(t) => {
                let n = t * t + 1.0;
                ((t * t - 1.0) / n, -2.0 * t / n)
            }
        }
    }

    /// Euclidean chord length between the disk images.
    pub fn chord(&self, other: &BoundaryPoint) -> f64 {
        let (x1, y1) = self.on_circle();
        let (x2, y2) = other.on_circle();
        ((x1 - x2).powi(2) + (y1 - y2).powi(2)).sqrt()
    }
}

/// Roots of `c t² + (d − a) t − b = 0`, labelled by the derivative
/// `1/(ct + d)²`: the attracting point is where it is smaller than one.
pub fn fixed_points(g: &MoebiusIsometry, tol: f64) -> Result<FixedPoints<BoundaryPoint>> {
    if classify_isometry(g, tol) != IsometryClass::Loxodromic {
        return Err(Error::Classification(format!("trace {} is not loxodromic", g.trace())));
    }
    let scale = g.frobenius_sq().sqrt();
    if g.c.abs() <= tol * scale {
        // z ↦ (a z + b)/d fixes ∞ and b/(d − a); ∞ attracts iff |a/d| > 1.
        let finite = BoundaryPoint::Finite(g.b / (g.d - g.a));
        return Ok(if (g.a / g.d).abs() > 1.0 {
            FixedPoints { attracting: BoundaryPoint::Infinity, repelling: finite }
        } else {
            FixedPoints { attracting: finite, repelling: BoundaryPoint::Infinity }
        });
    }
    let p = g.d - g.a;
    let disc = (g.trace() * g.trace() - 4.0).max(0.0).sqrt();
    // Numerically stable pair of roots.
    let q = -0.5 * (p + p.signum() * disc);
    let t1 = q / g.c;
    let t2 = -g.b / q;
    let deriv = |t: f64| (g.c * t + g.d).powi(2).recip();
    let (att, rep) = if deriv(t1) < deriv(t2) { (t1, t2) } else { (t2, t1) };
    Ok(FixedPoints { attracting: BoundaryPoint::Finite(att), repelling: BoundaryPoint::Finite(rep) })
}

/// Quantized, sign-normalized entries (the matrix lives in `PSL₂(ℝ)`).
pub(crate) fn moebius_key(g: &MoebiusIsometry) -> [i64; 4] {
    let e = g.entries();
    let sign = e.iter().find(|v| v.abs() > 1e-9).map_or(1.0, |v| v.signum());
    // Absolute resolution up to 1 and relative resolution beyond, so that
    // far-moving matrices neither saturate nor collide.
    e.map(|v| {
        let v = sign * v;
        let m = if v.abs() <= 1.0 { v.abs() } else { 1.0 + v.abs().ln() };
        let q = (v.signum() * m * 1e8).round();
        if q == 0.0 {
            0
        } else {
            q as i64
        }
    })
}

impl Group for MoebiusIsometry {
    type Key = [i64; 4];

    fn identity() -> Self {
        MoebiusIsometry::IDENTITY
    }

    fn compose(&self, other: &Self) -> Self {
        let m = self.mul(other);
        let det = m.det();
        // For large entries the computed determinant is cancellation noise.
        let noise = 64.0 * f64::EPSILON * ((m.a * m.d).abs() + (m.b * m.c).abs());
        if det > 0.0 && (det - 1.0).abs() > noise.max(1e-15) {
            let s = det.sqrt().recip();
            MoebiusIsometry { a: m.a * s, b: m.b * s, c: m.c * s, d: m.d * s }
        } else {
            m
        }
    }

    fn inverse(&self) -> Self {
        self.inv()
    }

    fn key(&self) -> [i64; 4] {
        moebius_key(self)
    }
}

/// Half-plane backend with plain coordinates. Accurate while points stay
/// within a few dozen units of `i`; use [`super::OrbitSpace`] for long walks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub delta: f64,
    pub tol: f64,
}

impl Default for HalfPlane {
    fn default() -> Self {
        HalfPlane { delta: DEFAULT_DELTA, tol: DEFAULT_TOLERANCE }
    }
}

impl HalfPlane {
    pub fn new(delta: f64, tol: f64) -> Result<HalfPlane> {
        if !(delta >= 0.0 && tol >= 0.0) {
            return Err(Error::Input("delta and tolerance must be nonnegative".into()));
        }
        Ok(HalfPlane { delta, tol })
    }
}

impl Space for HalfPlane {
    type Point = UpperHalfPoint;
    type Iso = MoebiusIsometry;

    fn basepoint(&self) -> UpperHalfPoint {
        UpperHalfPoint::I
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn tolerance(&self) -> f64 {
        self.tol
    }

    fn dist(&self, p: &UpperHalfPoint, q: &UpperHalfPoint) -> f64 {
        h2_dist(p, q)
    }

    /// # Panics
    ///
    /// Only for matrices far from determinant one, which the constructors of
    /// [`MoebiusIsometry`] reject.
    fn act(&self, g: &MoebiusIsometry, p: &UpperHalfPoint) -> UpperHalfPoint {
        moebius_act(g, p).expect("determinant-one matrices act on the half-plane")
    }

    fn displacement(&self, g: &MoebiusIsometry) -> f64 {
        (g.frobenius_sq() / 2.0).max(1.0).acosh()
    }
}

impl BoundarySpace for HalfPlane {
    type Boundary = BoundaryPoint;

    fn is_loxodromic(&self, g: &MoebiusIsometry) -> bool {
        classify_isometry(g, self.tol) == IsometryClass::Loxodromic
    }

    fn fixed_points(&self, g: &MoebiusIsometry) -> Result<FixedPoints<BoundaryPoint>> {
        fixed_points(g, self.tol)
    }

    /// `(ξ, ζ)_i = −ln(chord/2)` for the disk images of the two points.
    fn boundary_product(&self, a: &BoundaryPoint, b: &BoundaryPoint) -> f64 {
        let chord = a.chord(b);
        if chord <= self.tol.max(1e-12) {
            f64::INFINITY
        } else {
            -(chord / 2.0).ln()
        }
    }

    fn translation_length(&self, g: &MoebiusIsometry) -> f64 {
        g.translation_length()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn pt(x: f64, y: f64) -> UpperHalfPoint {
        UpperHalfPoint::new(x, y).unwrap()
    }

    fn random_point(rng: &mut ChaCha8Rng, radius: f64) -> UpperHalfPoint {
        UpperHalfPoint::polar(rng.gen_range(0.0..radius), rng.gen_range(0.0..2.0 * PI))
    }

    fn random_isometry(rng: &mut ChaCha8Rng) -> MoebiusIsometry {
        MoebiusIsometry::rotation(rng.gen_range(0.0..2.0 * PI))
            .mul(&MoebiusIsometry::transvection(rng.gen_range(0.0..4.0), rng.gen_range(0.0..2.0 * PI)))
    }

    /// Closed form `arccosh(1 + |p − q|²/(2 p.y q.y))`, used as the oracle.
    fn acosh_form(p: &UpperHalfPoint, q: &UpperHalfPoint) -> f64 {
        (1.0 + ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)) / (2.0 * p.y * q.y)).acosh()
    }

    #[test]
    fn distances() {
        assert_eq!(h2_dist(&UpperHalfPoint::I, &UpperHalfPoint::I), 0.0);
        assert!((h2_dist(&UpperHalfPoint::I, &pt(0.0, 2.0)) - 2f64.ln()).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let (p, q, r) = (random_point(&mut rng, 5.0), random_point(&mut rng, 5.0), random_point(&mut rng, 5.0));
            let pq = h2_dist(&p, &q);
            assert!((pq - h2_dist(&q, &p)).abs() < 1e-9);
            assert!(pq <= h2_dist(&p, &r) + h2_dist(&r, &q) + 1e-9);
            assert!((pq - acosh_form(&p, &q)).abs() < 1e-7);
        }
    }

    #[test]
    fn action() {
        let p = pt(0.3, 1.7);
        assert_eq!(moebius_act(&MoebiusIsometry::IDENTITY, &p).unwrap(), p);
        let s = 2f64.sqrt();
        let q = moebius_act(&MoebiusIsometry::new(s, 0.0, 0.0, 1.0 / s).unwrap(), &UpperHalfPoint::I).unwrap();
        assert!((q.x).abs() < 1e-15 && (q.y - 2.0).abs() < 1e-12);
        assert!(MoebiusIsometry::new(1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn action_is_isometric_and_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let g = random_isometry(&mut rng);
            let h = random_isometry(&mut rng);
            for _ in 0..10_000 {
                let p = random_point(&mut rng, 4.0);
                let q = random_point(&mut rng, 4.0);
                let gp = moebius_act(&g, &p).unwrap();
                let gq = moebius_act(&g, &q).unwrap();
                assert!((h2_dist(&p, &q) - h2_dist(&gp, &gq)).abs() < 1e-8);
            }
            let p = random_point(&mut rng, 4.0);
            let lhs = moebius_act(&g.mul(&h), &p).unwrap();
            let rhs = moebius_act(&g, &moebius_act(&h, &p).unwrap()).unwrap();
            assert!(h2_dist(&lhs, &rhs) < 1e-8);
        }
    }

    #[test]
    fn classification() {
        let tol = DEFAULT_TOLERANCE;
        assert_eq!(classify_isometry(&MoebiusIsometry::diag(2.0), tol), IsometryClass::Loxodromic);
        let (s, c) = (PI / 4.0).sin_cos();
        let r = MoebiusIsometry::new(c, s, -s, c).unwrap();
        assert_eq!(classify_isometry(&r, tol), IsometryClass::Elliptic);
        assert_eq!(MoebiusIsometry::rotation(PI / 2.0), r);
        let par = MoebiusIsometry::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(classify_isometry(&par, tol), IsometryClass::Parabolic);
        assert!((MoebiusIsometry::diag(2.0).translation_length() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fixed_points_of_diagonal_and_conjugate() {
        let u = MoebiusIsometry::diag(2.0);
        let fp = fixed_points(&u, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(fp.attracting, BoundaryPoint::Infinity);
        assert_eq!(fp.repelling, BoundaryPoint::Finite(0.0));
        let r = MoebiusIsometry::rotation(PI / 2.0);
        let v = r.mul(&u).mul(&r.inv());
        let fv = fixed_points(&v, DEFAULT_TOLERANCE).unwrap();
        // Quadratic-root oracle: c t² + (d − a) t − b = 0.
        for b in [fv.attracting, fv.repelling] {
            let BoundaryPoint::Finite(t) = b else { panic!("expected finite fixed point") };
            assert!((v.c * t * t + (v.d - v.a) * t - v.b).abs() < 1e-12);
            assert!((t.abs() - 1.0).abs() < 1e-12);
        }
        // The image of the attracting point of u under r.
        assert!(matches!(fv.attracting, BoundaryPoint::Finite(t) if (t + 1.0).abs() < 1e-12));
        assert!(fixed_points(&r, DEFAULT_TOLERANCE).is_err());
    }

    #[test]
    fn orbits_converge_to_attracting_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let g = MoebiusIsometry::transvection(rng.gen_range(0.5..3.0), rng.gen_range(0.0..2.0 * PI));
            let fp = fixed_points(&g, DEFAULT_TOLERANCE).unwrap();
            let mut p = random_point(&mut rng, 1.0);
            for _ in 0..60 {
                p = moebius_act(&g, &p).unwrap();
            }
            let chord = match fp.attracting {
                BoundaryPoint::Infinity => 2.0 / (1.0 + p.x * p.x + p.y * p.y).sqrt(),
                BoundaryPoint::Finite(t) => ((p.x - t).powi(2) + p.y.powi(2)).sqrt(),
            };
            assert!(chord < 1e-6, "orbit did not approach the attracting point: {chord}");
        }
    }

    #[test]
    fn boundary_product_matches_limit_of_products() {
        let h = HalfPlane::default();
        let (a, b) = (0.4f64, 2.1f64);
        let xi = BoundaryPoint::Finite((a / 2.0).tan());
        let zeta = BoundaryPoint::Finite((b / 2.0).tan());
        let r: f64 = 18.0;
        let x = moebius_act(&MoebiusIsometry::rotation(a), &pt(0.0, (-r).exp())).unwrap();
        let z = moebius_act(&MoebiusIsometry::rotation(b), &pt(0.0, (-r).exp())).unwrap();
        let o = UpperHalfPoint::I;
        let prod = (h2_dist(&x, &o) + h2_dist(&z, &o) - h2_dist(&x, &z)) / 2.0;
        assert!((prod - h.boundary_product(&xi, &zeta)).abs() < 1e-6, "{prod}");
        assert!(h.boundary_product(&xi, &xi).is_infinite());
    }

    /// Empirical four-point constant over a million sampled quadruples.
    #[test]
    fn sampled_delta_is_below_default() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let gp = |x: &UpperHalfPoint, z: &UpperHalfPoint, a: &UpperHalfPoint| {
            (h2_dist(x, a) + h2_dist(z, a) - h2_dist(x, z)) / 2.0
        };
        let mut worst = 0.0f64;
        for _ in 0..1_000_000 {
            let radius = if rng.gen_bool(0.5) { 3.0 } else { 12.0 };
            let pts: Vec<UpperHalfPoint> = (0..4).map(|_| random_point(&mut rng, radius)).collect();
            let (x, y, z, a) = (&pts[0], &pts[1], &pts[2], &pts[3]);
            worst = worst.max(gp(x, y, a).min(gp(y, z, a)) - gp(x, z, a));
        }
        assert!(worst <= DEFAULT_DELTA, "empirical delta {worst}");
        assert!(worst > 0.3, "sampler too weak: {worst}");
    }

    #[test]
    fn keys_separate_far_moving_elements() {
        let r = MoebiusIsometry::rotation(0.3);
        let far: Vec<MoebiusIsometry> =
            [1e6, 1e12, 1e16, 2e16].iter().map(|&l| r.compose(&MoebiusIsometry::diag(l))).collect();
        let keys: std::collections::BTreeSet<_> = far.iter().map(|g| g.key()).collect();
        assert_eq!(keys.len(), far.len());
        for g in &far {
            let scaled = MoebiusIsometry { a: -g.a, b: -g.b, c: -g.c, d: -g.d };
            assert_eq!(g.key(), scaled.key());
            assert!(g.key().iter().all(|k| k.abs() < i64::MAX / 2));
        }
        assert_eq!(MoebiusIsometry::IDENTITY.key(), [100_000_000, 0, 0, 100_000_000]);
        // Large entries carry determinant noise that the constructor tolerates.
        let [a, b, c, d] = far[3].entries();
        assert!(MoebiusIsometry::new(a, b, c, d).is_ok());
    }
}
