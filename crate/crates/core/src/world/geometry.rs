//! Planar geometry for world objects: convex polygons and ellipses, both in
//! a local frame whose origin is the shape centroid. World-frame queries
//! rotate/translate through the object pose.

/// Shape in local coordinates, centroid at the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalShape {
    /// Counter-clockwise convex polygon.
    Polygon(Vec<[f64; 2]>),
    /// Axis-aligned ellipse with semi-axes (a, b).
    Ellipse { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn center(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// World point -> local frame.
    fn to_local(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// World direction -> local frame.
    fn dir_to_local(&self, d: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [c * d[0] + s * d[1], -s * d[0] + c * d[1]]
    }
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

impl LocalShape {
    pub fn is_convex_ccw(&self) -> bool {
        match self {
            LocalShape::Ellipse { a, b } => *a > 0.0 && *b > 0.0,
            LocalShape::Polygon(v) => {
                if v.len() < 3 {
                    return false;
                }
                let n = v.len();
                (0..n).all(|i| {
                    let e1 = sub(v[(i + 1) % n], v[i]);
                    let e2 = sub(v[(i + 2) % n], v[(i + 1) % n]);
                    cross(e1, e2) > 0.0
                })
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            LocalShape::Ellipse { a, b } => std::f64::consts::PI * a * b,
            LocalShape::Polygon(v) => {
                let n = v.len();
                let twice: f64 = (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum();
                twice.abs() / 2.0
            }
        }
    }

    /// Centroid in local coordinates (should be ~origin after recentering).
    pub fn centroid(&self) -> [f64; 2] {
        match self {
            LocalShape::Ellipse { .. } => [0.0, 0.0],
            LocalShape::Polygon(v) => {
                let n = v.len();
                let mut cx = 0.0;
                let mut cy = 0.0;
                let mut twice_area = 0.0;
                for i in 0..n {
                    let c = cross(v[i], v[(i + 1) % n]);
                    twice_area += c;
                    cx += (v[i][0] + v[(i + 1) % n][0]) * c;
                    cy += (v[i][1] + v[(i + 1) % n][1]) * c;
                }
                [cx / (3.0 * twice_area), cy / (3.0 * twice_area)]
            }
        }
    }

    /// Largest distance from the local origin to the boundary.
    pub fn max_radius(&self) -> f64 {
        match self {
            LocalShape::Ellipse { a, b } => a.max(*b),
            LocalShape::Polygon(v) => {
                v.iter().map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt()).fold(0.0, f64::max)
            }
        }
    }

    fn contains_local(&self, p: [f64; 2]) -> bool {
        match self {
            LocalShape::Ellipse { a, b } => {
                let u = p[0] / a;
                let v = p[1] / b;
                u * u + v * v <= 1.0
            }
            LocalShape::Polygon(v) => {
                let n = v.len();
                (0..n).all(|i| cross(sub(v[(i + 1) % n], v[i]), sub(p, v[i])) >= 0.0)
            }
        }
    }

    /// Intersection of the full line p + t*d with the shape, as a t-interval.
    fn line_interval_local(&self, p: [f64; 2], d: [f64; 2]) -> Option<(f64, f64)> {
        match self {
            LocalShape::Ellipse { a, b } => {
                let q = [p[0] / a, p[1] / b];
                let e = [d[0] / a, d[1] / b];
                let aa = e[0] * e[0] + e[1] * e[1];
                let bb = 2.0 * (q[0] * e[0] + q[1] * e[1]);
                let cc = q[0] * q[0] + q[1] * q[1] - 1.0;
                let disc = bb * bb - 4.0 * aa * cc;
                if disc < 0.0 || aa == 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                Some(((-bb - sq) / (2.0 * aa), (-bb + sq) / (2.0 * aa)))
            }
            LocalShape::Polygon(v) => {
                // Clip the line against each edge half-plane (CCW: inside is
                // left of each edge).
                let n = v.len();
                let mut t_min = f64::NEG_INFINITY;
                let mut t_max = f64::INFINITY;
                for i in 0..n {
                    let edge = sub(v[(i + 1) % n], v[i]);
                    // outward normal of a CCW edge
                    let normal = [edge[1], -edge[0]];
                    let denom = normal[0] * d[0] + normal[1] * d[1];
                    let dist = normal[0] * (p[0] - v[i][0]) + normal[1] * (p[1] - v[i][1]);
                    if denom.abs() < 1e-12 {
                        if dist > 0.0 {
                            return None; // parallel and outside
                        }
                        continue;
                    }
                    let t = -dist / denom;
                    if denom < 0.0 {
                        t_min = t_min.max(t); // entering
                    } else {
                        t_max = t_max.min(t); // leaving
                    }
                }
                if t_min <= t_max {
                    Some((t_min, t_max))
                } else {
                    None
                }
            }
        }
    }

    /// Shape extent (max - min of the projection) along a local unit direction.
    fn support_width_local(&self, u: [f64; 2]) -> f64 {
        match self {
            LocalShape::Ellipse { a, b } => {
                2.0 * ((a * u[0]).powi(2) + (b * u[1]).powi(2)).sqrt()
            }
            LocalShape::Polygon(v) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for p in v {
                    let s = p[0] * u[0] + p[1] * u[1];
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
                hi - lo
            }
        }
    }

    /// Axis-aligned half-extents of the shape rotated by `theta`.
    pub fn rotated_half_extents(&self, theta: f64) -> [f64; 2] {
        match self {
            LocalShape::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                [
                    ((a * c).powi(2) + (b * s).powi(2)).sqrt(),
                    ((a * s).powi(2) + (b * c).powi(2)).sqrt(),
                ]
            }
            LocalShape::Polygon(v) => {
                let (s, c) = theta.sin_cos();
                let mut hx: f64 = 0.0;
                let mut hy: f64 = 0.0;
                for p in v {
                    hx = hx.max((c * p[0] - s * p[1]).abs());
                    hy = hy.max((s * p[0] + c * p[1]).abs());
                }
                [hx, hy]
            }
        }
    }
}

/// World-frame geometry queries through a pose.
pub struct Placed<'a> {
    pub shape: &'a LocalShape,
    pub pose: &'a Pose,
}

impl Placed<'_> {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.shape.contains_local(self.pose.to_local(p))
    }

    /// Length of the chord through world point `p` along unit direction `d`,
    /// or None if the line misses the shape or `p` lies outside it.
    pub fn chord_through(&self, p: [f64; 2], d: [f64; 2]) -> Option<f64> {
        let lp = self.pose.to_local(p);
        if !self.shape.contains_local(lp) {
            return None;
        }
        let ld = self.pose.dir_to_local(d);
        let (t0, t1) = self.shape.line_interval_local(lp, ld)?;
        Some(t1 - t0)
    }

    /// Shape extent along a world unit direction.
    pub fn support_width(&self, d: [f64; 2]) -> f64 {
        self.shape.support_width_local(self.pose.dir_to_local(d))
    }

    /// First intersection of segment a->b with the shape: (t in [0,1], point).
    pub fn segment_entry(&self, a: [f64; 2], b: [f64; 2]) -> Option<(f64, [f64; 2])> {
        let la = self.pose.to_local(a);
        let d = [b[0] - a[0], b[1] - a[1]];
        let ld = self.pose.dir_to_local(d);
        let (t0, t1) = self.shape.line_interval_local(la, ld)?;
        let enter = t0.max(0.0);
        if enter > t1 || enter > 1.0 {
            return None;
        }
        Some((enter, [a[0] + enter * d[0], a[1] + enter * d[1]]))
    }
}
