//! Closed boundary curves: dictionary parameterizations, panel meshes and
//! rigid motions.
//!
//! A mesh has `M` panels obtained by splitting the curve parameter into `M`
//! equal intervals. Each panel is represented by its parameter midpoint
//! (collocation point), the outward unit normal and the signed curvature there,
//! and a weight equal to the one-point approximation of the panel arc length,
//! `|x'(u_i)| / M`. On smooth periodic parameterizations this is the periodic
//! trapezoidal rule, so boundary integrals of smooth integrands converge
//! spectrally.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Smallest accepted panel count.
pub const MIN_PANELS: usize = 32;

/// The eight shapes of the reference dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeId {
    Circle,
    Ellipse,
    Flower,
    Square,
    Rectangle,
    #[serde(rename = "letterA")]
    LetterA,
    #[serde(rename = "letterL")]
    LetterL,
    Ellipse2,
}

impl ShapeId {
    pub const ALL: [ShapeId; 8] = [
        ShapeId::Circle,
        ShapeId::Ellipse,
        ShapeId::Flower,
        ShapeId::Square,
        ShapeId::Rectangle,
        ShapeId::LetterA,
        ShapeId::LetterL,
        ShapeId::Ellipse2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeId::Circle => "circle",
            ShapeId::Ellipse => "ellipse",
            ShapeId::Flower => "flower",
            ShapeId::Square => "square",
            ShapeId::Rectangle => "rectangle",
            ShapeId::LetterA => "letterA",
            ShapeId::LetterL => "letterL",
            ShapeId::Ellipse2 => "ellipse2",
        }
    }

    pub fn parameterization(self) -> Parameterization {
        match self {
            ShapeId::Circle => Parameterization::Circle { radius: 1.0 },
            ShapeId::Ellipse | ShapeId::Ellipse2 => Parameterization::Ellipse { a: 1.0, b: 0.5 },
            ShapeId::Flower => Parameterization::Flower {
                radius: 1.0,
                amplitude: 0.3,
                petals: 5,
            },
            ShapeId::Square => Parameterization::RoundedPolygon {
                vertices: rectangle_vertices(2.0, 2.0),
                fillet: 0.1,
            },
            ShapeId::Rectangle => Parameterization::RoundedPolygon {
                vertices: rectangle_vertices(2.0, 1.0),
                fillet: 0.1,
            },
            ShapeId::LetterA => Parameterization::RoundedPolygon {
                vertices: scale_to_diameter(
                    &[
                        [-1.0, -1.0],
                        [-0.6, -1.0],
                        [-0.4, -0.45],
                        [0.4, -0.45],
                        [0.6, -1.0],
                        [1.0, -1.0],
                        [0.2, 1.0],
                        [-0.2, 1.0],
                    ],
                    2.0,
                ),
                fillet: 0.05,
            },
            ShapeId::LetterL => Parameterization::RoundedPolygon {
                vertices: scale_to_diameter(
                    &[[0.0, 0.0], [1.2, 0.0], [1.2, 0.5], [0.5, 0.5], [0.5, 2.0], [0.0, 2.0]],
                    2.0,
                ),
                fillet: 0.05,
            },
        }
    }

    /// Conductivity and permittivity used for this dictionary element.
    pub fn material(self) -> Material {
        match self {
            ShapeId::Ellipse2 => Material {
                sigma: 5.0,
                epsilon: 2.0,
            },
            _ => Material {
                sigma: 10.0,
                epsilon: 1.0,
            },
        }
    }
}

impl fmt::Display for ShapeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::UnknownShape(s.to_string()))
    }
}

fn rectangle_vertices(width: f64, height: f64) -> Vec<[f64; 2]> {
    let (w, h) = (width / 2.0, height / 2.0);
    vec![[-w, -h], [w, -h], [w, h], [-w, h]]
}

fn scale_to_diameter(vertices: &[[f64; 2]], diameter: f64) -> Vec<[f64; 2]> {
    let mut widest: f64 = 0.0;
    for p in vertices {
        for q in vertices {
            widest = widest.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
        }
    }
    let k = diameter / widest;
    vertices.iter().map(|p| [p[0] * k, p[1] * k]).collect()
}

/// Analytic description of a closed curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "parameterization", content = "parameters", rename_all = "snake_case")]
pub enum Parameterization {
    Circle {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// Polar curve `r(t) = radius * (1 + amplitude cos(petals t))`.
    Flower {
        radius: f64,
        amplitude: f64,
        petals: u32,
    },
    /// Polygon whose corners are replaced by circular fillets.
    RoundedPolygon {
        vertices: Vec<[f64; 2]>,
        fillet: f64,
    },
}

/// A point of a curve for parameter `u in [0, 1)`.
#[derive(Debug, Clone, Copy)]
struct CurveSample {
    position: Vec2,
    /// dx/du
    velocity: Vec2,
    curvature: f64,
}

enum Curve {
    Smooth(Parameterization),
    Rounded(RoundedPolygon),
}

impl Curve {
    fn new(p: &Parameterization) -> Result<Self> {
        match p {
            Parameterization::Circle { radius } if *radius > 0.0 => Ok(Curve::Smooth(p.clone())),
            Parameterization::Ellipse { a, b } if *a > 0.0 && *b > 0.0 => Ok(Curve::Smooth(p.clone())),
            Parameterization::Flower {
                radius,
                amplitude,
                petals,
            } if *radius > 0.0 && amplitude.abs() < 1.0 && *petals > 0 => Ok(Curve::Smooth(p.clone())),
            Parameterization::RoundedPolygon { vertices, fillet } => {
                Ok(Curve::Rounded(RoundedPolygon::new(vertices, *fillet)?))
            }
            other => Err(Error::InvalidGeometry(format!("invalid parameters for {other:?}"))),
        }
    }

    fn sample(&self, u: f64) -> CurveSample {
        match self {
            Curve::Smooth(p) => {
                let t = TAU * u;
                // position, first and second derivative with respect to t
                let (x, d1, d2) = match *p {
                    Parameterization::Circle { radius } => {
                        let (s, c) = t.sin_cos();
                        (
                            Vec2::new(radius * c, radius * s),
                            Vec2::new(-radius * s, radius * c),
                            Vec2::new(-radius * c, -radius * s),
                        )
                    }
                    Parameterization::Ellipse { a, b } => {
                        let (s, c) = t.sin_cos();
                        (
                            Vec2::new(a * c, b * s),
                            Vec2::new(-a * s, b * c),
                            Vec2::new(-a * c, -b * s),
                        )
                    }
                    Parameterization::Flower {
                        radius,
                        amplitude,
                        petals,
                    } => {
                        let k = petals as f64;
                        let (s, c) = t.sin_cos();
                        let (sk, ck) = (k * t).sin_cos();
                        let r = radius * (1.0 + amplitude * ck);
                        let r1 = -radius * amplitude * k * sk;
                        let r2 = -radius * amplitude * k * k * ck;
                        (
                            Vec2::new(r * c, r * s),
                            Vec2::new(r1 * c - r * s, r1 * s + r * c),
                            Vec2::new(r2 * c - 2.0 * r1 * s - r * c, r2 * s + 2.0 * r1 * c - r * s),
                        )
                    }
                    Parameterization::RoundedPolygon { .. } => unreachable!(),
                };
                let speed = d1.norm();
                CurveSample {
                    position: x,
                    velocity: d1 * TAU,
                    curvature: (d1.x * d2.y - d1.y * d2.x) / speed.powi(3),
                }
            }
            Curve::Rounded(_) => unreachable!(),
        }
    }

    fn panels(&self, m: usize) -> Vec<Panel> {
        match self {
            Curve::Smooth(_) => (0..m)
                .map(|i| {
                    let mut mid = self.sample((i as f64 + 0.5) / m as f64);
                    mid.velocity /= m as f64;
                    Panel {
                        start: self.sample(i as f64 / m as f64).position,
                        mid,
                    }
                })
                .collect(),
            Curve::Rounded(poly) => poly.panels(m),
        }
    }
}

#[derive(Debug, Clone)]
enum Piece {
    Segment {
        start: Vec2,
        dir: Vec2,
        length: f64,
    },
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        /// +1 for a left (convex) turn, -1 for a right (reflex) turn.
        turn: f64,
        length: f64,
    },
}

impl Piece {
    fn length(&self) -> f64 {
        match self {
            Piece::Segment { length, .. } | Piece::Arc { length, .. } => *length,
        }
    }
}

/// Arc-length parameterized polygon with filleted corners.
#[derive(Debug, Clone)]
struct RoundedPolygon {
    pieces: Vec<Piece>,
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

impl RoundedPolygon {
    fn new(raw: &[[f64; 2]], fillet: f64) -> Result<Self> {
        if raw.len() < 3 {
            return Err(Error::InvalidGeometry("polygon needs at least 3 vertices".into()));
        }
        if fillet <= 0.0 {
            return Err(Error::InvalidGeometry("fillet radius must be positive".into()));
        }
        let mut v: Vec<Vec2> = raw.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        let signed_area: f64 = (0..v.len()).map(|i| cross(v[i], v[(i + 1) % v.len()])).sum::<f64>() / 2.0;
        if signed_area < 0.0 {
            v.reverse();
        }
        let n = v.len();
        // fillet start/end points for every corner
        let mut arcs = Vec::with_capacity(n);
        for i in 0..n {
            let prev = v[(i + n - 1) % n];
            let next = v[(i + 1) % n];
            let d_in = (v[i] - prev).normalize();
            let d_out = (next - v[i]).normalize();
            let turn_angle = cross(d_in, d_out).atan2(d_in.dot(&d_out));
            let tangent = fillet * (turn_angle.abs() / 2.0).tan();
            let start = v[i] - d_in * tangent;
            let turn = turn_angle.signum();
            let left = Vec2::new(-d_in.y, d_in.x);
            let center = start + left * (turn * fillet);
            let start_angle = (start.y - center.y).atan2(start.x - center.x);
            arcs.push((start, v[i] + d_out * tangent, center, start_angle, turn, turn_angle));
        }
        let mut pieces = Vec::with_capacity(2 * n);
        for i in 0..n {
            let (_, end, center, start_angle, turn, angle) = arcs[i];
            pieces.push(Piece::Arc {
                center,
                radius: fillet,
                start_angle,
                turn,
                length: fillet * angle.abs(),
            });
            let next_start = arcs[(i + 1) % n].0;
            let chord = next_start - end;
            let along = chord.dot(&(v[(i + 1) % n] - v[i]).normalize());
            if along < 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "fillet radius {fillet} too large for edge {i}"
                )));
            }
            if along > 0.0 {
                pieces.push(Piece::Segment {
                    start: end,
                    dir: chord / chord.norm(),
                    length: chord.norm(),
                });
            }
        }

        Ok(Self { pieces })
    }

    /// Position, unit tangent and curvature at arc length `local` along piece `idx`.
    fn sample_piece(&self, idx: usize, local: f64) -> (Vec2, Vec2, f64) {
        match self.pieces[idx] {
            Piece::Segment { start, dir, .. } => (start + dir * local, dir, 0.0),
            Piece::Arc {
                center,
                radius,
                start_angle,
                turn,
                ..
            } => {
                let a = start_angle + turn * local / radius;
                let (sa, ca) = a.sin_cos();
                (
                    center + Vec2::new(ca, sa) * radius,
                    Vec2::new(-sa, ca) * turn,
                    turn / radius,
                )
            }
        }
    }

    /// Splits `m` panels among the pieces, refining the fillets by
    /// [`FILLET_GRADING`] relative to the straight edges.
    fn panel_counts(&self, m: usize) -> Vec<usize> {
        let effective: Vec<f64> = self
            .pieces
            .iter()
            .map(|p| match p {
                Piece::Segment { length, .. } => *length,
                Piece::Arc { length, .. } => FILLET_GRADING * length,
            })
            .collect();
        let total: f64 = effective.iter().sum();
        let ideal: Vec<f64> = effective.iter().map(|e| m as f64 * e / total).collect();
        let mut counts: Vec<usize> = ideal.iter().map(|x| (x.floor() as usize).max(1)).collect();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())));
        let mut assigned: usize = counts.iter().sum();
        let mut k = 0;
        while assigned < m {
            counts[order[k % order.len()]] += 1;
            assigned += 1;
            k += 1;
        }
        while assigned > m {
            let largest = (0..counts.len()).max_by_key(|&i| counts[i]).unwrap();
            counts[largest] -= 1;
            assigned -= 1;
        }
        counts
    }

    fn panels(&self, m: usize) -> Vec<Panel> {
        let mut out = Vec::with_capacity(m);
        for (idx, n) in self.panel_counts(m).into_iter().enumerate() {
            let h = self.pieces[idx].length() / n as f64;
            for i in 0..n {
                let (start, _, _) = self.sample_piece(idx, i as f64 * h);
                let (position, tangent, curvature) = self.sample_piece(idx, (i as f64 + 0.5) * h);
                out.push(Panel {
                    start,
                    mid: CurveSample {
                        position,
                        velocity: tangent * h,
                        curvature,
                    },
                });
            }
        }
        out
    }
}

/// Fillets receive this many times more panels per unit length than edges.
const FILLET_GRADING: f64 = 6.0;

/// A panel: its first endpoint and its collocation sample, whose velocity is
/// the derivative with respect to the panel-local parameter in `[0, 1]`, so
/// that `|velocity|` is the panel weight.
struct Panel {
    start: Vec2,
    mid: CurveSample,
}

/// Discretized closed curve, oriented counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMesh {
    /// Panel collocation points (parameter midpoints).
    pub points: Vec<Vec2>,
    /// Outward unit normals at the collocation points.
    pub normals: Vec<Vec2>,
    /// Panel weights (arc length of each panel, one-point rule).
    pub weights: Vec<f64>,
    /// Signed curvature at the collocation points, positive where convex.
    pub curvature: Vec<f64>,
    /// Panel endpoints; panel `i` runs from `vertices[i]` to `vertices[i + 1 mod M]`.
    pub vertices: Vec<Vec2>,
    pub centroid: Vec2,
    pub area: f64,
}

impl BoundaryMesh {
    pub fn from_parameterization(p: &Parameterization, panels: usize) -> Result<Self> {
        if panels < MIN_PANELS {
            return Err(Error::InsufficientResolution {
                panels,
                min: MIN_PANELS,
            });
        }
        let curve = Curve::new(p)?;
        let mut points = Vec::with_capacity(panels);
        let mut normals = Vec::with_capacity(panels);
        let mut weights = Vec::with_capacity(panels);
        let mut curvature = Vec::with_capacity(panels);
        let mut vertices = Vec::with_capacity(panels);
        for panel in curve.panels(panels) {
            let s = panel.mid;
            let speed = s.velocity.norm();
            points.push(s.position);
            normals.push(Vec2::new(s.velocity.y, -s.velocity.x) / speed);
            weights.push(speed);
            curvature.push(s.curvature);
            vertices.push(panel.start);
        }
        let mut mesh = Self {
            points,
            normals,
            weights,
            curvature,
            vertices,
            centroid: Vec2::zeros(),
            area: 0.0,
        };
        mesh.update_moments();
        if mesh.area <= 0.0 {
            return Err(Error::InvalidGeometry("curve encloses a non-positive area".into()));
        }
        Ok(mesh)
    }

    fn update_moments(&mut self) {
        let mut area = 0.0;
        let mut first = Vec2::zeros();
        for i in 0..self.len() {
            let (x, n, w) = (self.points[i], self.normals[i], self.weights[i]);
            area += 0.5 * x.dot(&n) * w;
            first += Vec2::new(x.x * x.x * n.x, x.y * x.y * n.y) * (0.5 * w);
        }
        self.area = area;
        self.centroid = first / area;
    }

    /// Translates the mesh so that its centroid sits at the origin.
    pub fn centered(mut self) -> Self {
        let c = self.centroid;
        for p in self.points.iter_mut().chain(self.vertices.iter_mut()) {
            *p -= c;
        }
        self.update_moments();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn max_panel(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest distance between two panel endpoints.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, p) in self.vertices.iter().enumerate() {
            for q in &self.vertices[i + 1..] {
                d = d.max((p - q).norm());
            }
        }
        d
    }

    /// Winding-number test against the polygon of panel endpoints.
    pub fn contains(&self, x: Vec2) -> bool {
        let n = self.vertices.len();
        let mut winding = 0i32;
        for i in 0..n {
            let a = self.vertices[i] - x;
            let b = self.vertices[(i + 1) % n] - x;
            if a.y <= 0.0 {
                if b.y > 0.0 && cross(a, b) > 0.0 {
                    winding += 1;
                }
            } else if b.y <= 0.0 && cross(a, b) < 0.0 {
                winding -= 1;
            }
        }
        winding != 0
    }

    /// Smallest distance from `x` to a collocation point.
    pub fn distance_to(&self, x: Vec2) -> f64 {
        self.points.iter().map(|p| (p - x).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Checks the structural invariants of a mesh.
    pub fn validate(&self) -> Result<()> {
        let m = self.len();
        if m < MIN_PANELS {
            return Err(Error::InsufficientResolution {
                panels: m,
                min: MIN_PANELS,
            });
        }
        if [
            self.normals.len(),
            self.weights.len(),
            self.curvature.len(),
            self.vertices.len(),
        ]
        .iter()
        .any(|&k| k != m)
        {
            return Err(Error::InvalidGeometry("inconsistent mesh array lengths".into()));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidGeometry("non-positive panel weight".into()));
        }
        if self.normals.iter().any(|n| (n.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidGeometry("normals are not unit length".into()));
        }
        if !(self.area > 0.0) {
            return Err(Error::InvalidGeometry("non-positive area".into()));
        }
        Ok(())
    }

    /// Hash of the collocation data, used to tie operators to their mesh.
    pub fn key(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for i in 0..self.len() {
            eat(self.points[i].x);
            eat(self.points[i].y);
            eat(self.weights[i]);
        }
        h
    }
}

/// Builds the mesh of a dictionary shape, centered on its centroid.
pub fn make_shape(name: &str, panels: usize) -> Result<BoundaryMesh> {
    let id: ShapeId = name
        .parse()
        .map_err(|_| Error::UnknownShape(format!("unknown dictionary shape '{name}'")))?;
    make_shape_id(id, panels)
}

pub fn make_shape_id(id: ShapeId, panels: usize) -> Result<BoundaryMesh> {
    Ok(BoundaryMesh::from_parameterization(&id.parameterization(), panels)?.centered())
}

/// `x -> z + s R(theta) x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub translation: [f64; 2],
    pub scale: f64,
    pub angle: f64,
}

impl Default for RigidMotion {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self {
            translation: [0.0, 0.0],
            scale: 1.0,
            angle: 0.0,
        }
    }

    pub fn new(translation: [f64; 2], scale: f64, angle: f64) -> Result<Self> {
        let g = Self {
            translation,
            scale,
            angle,
        };
        g.validate()?;
        Ok(g)
    }

    /// The transformation applied to the targets of the reference experiments.
    pub fn reference_target() -> Self {
        Self {
            translation: [0.1, 0.1],
            scale: 1.5,
            angle: PI / 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::InvalidMotion(self.scale));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.angle.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    pub fn z(&self) -> Vec2 {
        Vec2::new(self.translation[0], self.translation[1])
    }

    pub fn is_identity(&self) -> bool {
        self.translation == [0.0, 0.0] && self.scale == 1.0 && self.angle == 0.0
    }

    pub fn apply_point(&self, x: Vec2) -> Vec2 {
        self.z() + self.rotation() * x * self.scale
    }
}

/// Maps a mesh through `x -> z + s R x`.
pub fn apply_motion(mesh: &BoundaryMesh, g: &RigidMotion) -> Result<BoundaryMesh> {
    g.validate()?;
    if g.is_identity() {
        return Ok(mesh.clone());
    }
    let r = g.rotation();
    let s = g.scale;
    let map = |x: &Vec2| g.apply_point(*x);
    Ok(BoundaryMesh {
        points: mesh.points.iter().map(map).collect(),
        normals: mesh.normals.iter().map(|n| r * n).collect(),
        weights: mesh.weights.iter().map(|w| w * s).collect(),
        curvature: mesh.curvature.iter().map(|k| k / s).collect(),
        vertices: mesh.vertices.iter().map(map).collect(),
        centroid: g.apply_point(mesh.centroid),
        area: mesh.area * s * s,
    })
}

/// Conductivity and permittivity of a target in a background with
/// conductivity 1 and permittivity 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub sigma: f64,
    pub epsilon: f64,
}

impl Material {
    pub fn new(sigma: f64, epsilon: f64) -> Result<Self> {
        let m = Self { sigma, epsilon };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidMaterial(format!(
                "conductivity must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidMaterial(format!(
                "permittivity must be positive, got {}",
                self.epsilon
            )));
        }
        if self.sigma == 1.0 {
            return Err(Error::InvalidMaterial(
                "conductivity equals the background value".into(),
            ));
        }
        Ok(())
    }

    /// `(sigma + 1) / (2 (sigma - 1))`
    pub fn lambda(&self) -> f64 {
        (self.sigma + 1.0) / (2.0 * (self.sigma - 1.0))
    }

    /// `epsilon / (sigma - 1)`
    pub fn alpha(&self) -> f64 {
        self.epsilon / (self.sigma - 1.0)
    }

    /// Admittivity `sigma + i epsilon omega`.
    pub fn admittivity(&self, omega: f64) -> nalgebra::Complex<f64> {
        nalgebra::Complex::new(self.sigma, self.epsilon * omega)
    }

    /// `(kappa + 1) / (2 (kappa - 1))` at frequency `omega`.
    pub fn lambda_at(&self, omega: f64) -> nalgebra::Complex<f64> {
        let k = self.admittivity(omega);
        (k + 1.0) / ((k - 1.0) * 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_perimeter_and_area() {
        let m = make_shape("circle", 512).unwrap();
        assert_relative_eq!(m.perimeter(), TAU, max_relative = 1e-4);
        assert_relative_eq!(m.area, PI, max_relative = 1e-10);
        m.validate().unwrap();
    }

    #[test]
    fn ellipse_area() {
        let m = make_shape("ellipse", 512).unwrap();
        assert_relative_eq!(m.area, PI * 0.5, max_relative = 1e-4);
    }

    #[test]
    fn flower_is_closed() {
        let m = make_shape("flower", 512).unwrap();
        assert!(m.area > 0.0);
        // last panel ends where the first starts
        let c = Curve::new(&ShapeId::Flower.parameterization()).unwrap();
        let end = c.sample(1.0).position;
        assert!((end - c.sample(0.0).position).norm() < 1e-12);
    }

    #[test]
    fn polygon_fillets_tile_the_boundary() {
        for id in [ShapeId::Square, ShapeId::Rectangle, ShapeId::LetterA, ShapeId::LetterL] {
            let Curve::Rounded(poly) = Curve::new(&id.parameterization()).unwrap() else {
                panic!()
            };
            // consecutive pieces join with a continuous tangent
            let n = poly.pieces.len();
            for i in 0..n {
                let (end, t_end, _) = poly.sample_piece(i, poly.pieces[i].length());
                let (next, t_next, _) = poly.sample_piece((i + 1) % n, 0.0);
                assert!((end - next).norm() < 1e-12, "{id} piece {i}");
                assert!((t_end - t_next).norm() < 1e-12, "{id} piece {i}");
            }
            let counts = poly.panel_counts(256);
            assert_eq!(counts.iter().sum::<usize>(), 256);
            assert!(counts.iter().all(|&c| c >= 1));
            let mesh = make_shape_id(id, 256).unwrap();
            assert!(mesh.contains(Vec2::zeros()), "{id} must contain the origin");
            assert!(mesh.curvature.iter().all(|k| k.abs() <= 1.0 / 0.05 + 1e-9));
        }
    }

    #[test]
    fn square_area_accounts_for_fillets() {
        let exact = 4.0 - (4.0 - PI) * 0.01;
        let err = |m| (make_shape("square", m).unwrap().area - exact).abs();
        let (coarse, fine) = (err(512), err(1024));
        assert!(fine < 1e-5 * exact);
        // second-order midpoint rule on the fillets
        assert!((coarse / fine - 4.0).abs() < 0.2, "{}", coarse / fine);
    }

    #[test]
    fn unknown_shape_and_low_resolution() {
        assert!(matches!(make_shape("hexagon", 64), Err(Error::UnknownShape(_))));
        assert!(matches!(
            make_shape("circle", 16),
            Err(Error::InsufficientResolution { .. })
        ));
    }

    #[test]
    fn identity_motion_is_exact() {
        let m = make_shape("letterL", 128).unwrap();
        let g = apply_motion(&m, &RigidMotion::identity()).unwrap();
        assert_eq!(m, g);
    }

    #[test]
    fn reference_motion_on_circle() {
        let m = make_shape("circle", 512).unwrap();
        let g = apply_motion(&m, &RigidMotion::reference_target()).unwrap();
        assert!((g.centroid - Vec2::new(0.1, 0.1)).norm() < 1e-12);
        assert_relative_eq!(g.perimeter(), 3.0 * PI, max_relative = 1e-4);
        g.validate().unwrap();
    }

    #[test]
    fn dilations_compose() {
        let m = make_shape("flower", 128).unwrap();
        let two = RigidMotion::new([0.0, 0.0], 2.0, 0.0).unwrap();
        let four = RigidMotion::new([0.0, 0.0], 4.0, 0.0).unwrap();
        let twice = apply_motion(&apply_motion(&m, &two).unwrap(), &two).unwrap();
        assert_eq!(twice, apply_motion(&m, &four).unwrap());
    }

    #[test]
    fn negative_scale_rejected() {
        let m = make_shape("circle", 64).unwrap();
        let g = RigidMotion {
            translation: [0.0, 0.0],
            scale: -1.0,
            angle: 0.0,
        };
        assert!(matches!(apply_motion(&m, &g), Err(Error::InvalidMotion(_))));
    }

    #[test]
    fn rotation_is_orthogonal() {
        let g = RigidMotion::reference_target();
        let r = g.rotation();
        assert!((r.transpose() * r - Matrix2::identity()).norm() < 1e-14);
    }

    #[test]
    fn refinement_converges() {
        for name in ["circle", "ellipse", "flower"] {
            let coarse = make_shape(name, 128).unwrap();
            let fine = make_shape(name, 256).unwrap();
            let m = 128f64;
            assert!((coarse.perimeter() - fine.perimeter()).abs() < 10.0 / (m * m), "{name}");
            assert!((coarse.area - fine.area).abs() < 10.0 / (m * m), "{name}");
        }
    }

    #[test]
    fn material_constants() {
        let m = Material::new(10.0, 1.0).unwrap();
        assert_relative_eq!(m.lambda(), 11.0 / 18.0);
        assert_relative_eq!(m.alpha(), 1.0 / 9.0);
        assert_relative_eq!(m.lambda_at(0.0).re, m.lambda());
        assert!(Material::new(1.0, 1.0).is_err());
    }
}
