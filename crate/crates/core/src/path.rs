//! Arc-length parameterized reference paths.
//!
//! A path is either an interpolating cubic spline through waypoints or an
//! exact circle. Splines are built in a chord-length parameter `u` and then
//! reparameterized by arc length through a dense `(s, u)` lookup table
//! refined with Newton steps on Gauss–Legendre quadrature, so every query
//! below takes the arc length `s` in meters.
//!
//! The lateral offset convention is fixed here for the whole crate: the
//! path normal is the unit tangent rotated by +90°, so a positive offset is
//! to the left of the direction of travel.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

/// Spacing of the arc-length lookup table.
const TABLE_RESOLUTION: f64 = 0.01;
/// Grid spacing used to bracket projection minima.
const PROJECTION_GRID: f64 = 0.5;
/// Newton convergence threshold for projection, in meters of arc length.
const PROJECTION_TOL: f64 = 1e-9;
/// Slack when accepting arc lengths at the ends of an open path.
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("need at least {required} waypoints, got {got}")]
    TooFewWaypoints { required: usize, got: usize },
    #[error("waypoints {first} and {second} coincide")]
    DuplicateWaypoint { first: usize, second: usize },
    #[error("arc length {s} outside [0, {length}]")]
    OutOfRange { s: f64, length: f64 },
    #[error("projection of ({x}, {y}) is not unique")]
    ProjectionAmbiguous { x: f64, y: f64 },
    #[error("invalid path parameter: {0}")]
    InvalidParameter(String),
}

/// Pose of the path at one arc length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPose {
    pub position: [f64; 2],
    /// Tangent heading, wrapped to (−π, π].
    pub heading: f64,
    /// Signed curvature, positive when the path turns left.
    pub curvature: f64,
    /// Derivative of curvature with respect to arc length.
    pub curvature_rate: f64,
}

impl PathPose {
    pub fn tangent(&self) -> [f64; 2] {
        [self.heading.cos(), self.heading.sin()]
    }

    /// Left-pointing unit normal.
    pub fn normal(&self) -> [f64; 2] {
        [-self.heading.sin(), self.heading.cos()]
    }

    /// World point at lateral offset `y_tilde` from this pose.
    pub fn offset(&self, y_tilde: f64) -> [f64; 2] {
        let n = self.normal();
        [
            self.position[0] + y_tilde * n[0],
            self.position[1] + y_tilde * n[1],
        ]
    }
}

/// Result of an orthogonal projection onto a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub s: f64,
    pub y_tilde: f64,
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let wrapped = (angle + PI).rem_euclid(TAU) - PI;
    if wrapped <= -PI {
        wrapped + TAU
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    geometry: Geometry,
    total_length: f64,
    closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Geometry {
    Spline(SplineCurve),
    /// Counter-clockwise circle starting at `start_angle`.
    Circle {
        center: [f64; 2],
        radius: f64,
        start_angle: f64,
    },
}

impl ReferencePath {
    /// Builds a C² cubic spline through `waypoints`, reparameterized by arc
    /// length. Open paths use natural end conditions; closed paths use
    /// periodic ones so curvature stays continuous across the seam.
    pub fn from_waypoints(waypoints: &[[f64; 2]], closed: bool) -> Result<Self, PathError> {
        let required = if closed { 3 } else { 2 };
        if waypoints.len() < required {
            return Err(PathError::TooFewWaypoints {
                required,
                got: waypoints.len(),
            });
        }
        if let Some(bad) = waypoints.iter().flatten().find(|c| !c.is_finite()) {
            return Err(PathError::InvalidParameter(format!(
                "non-finite waypoint coordinate {bad}"
            )));
        }
        let n = waypoints.len();
        let pairs = if closed { n } else { n - 1 };
        for k in 0..pairs {
            let next = (k + 1) % n;
            if distance(waypoints[k], waypoints[next]) < 1e-12 {
                return Err(PathError::DuplicateWaypoint {
                    first: k,
                    second: next,
                });
            }
        }
        let curve = SplineCurve::new(waypoints, closed);
        let total_length = *curve.table_s.last().expect("table is never empty");
        Ok(Self {
            geometry: Geometry::Spline(curve),
            total_length,
            closed,
        })
    }

    /// Straight segment from `start` along `heading`.
    pub fn straight(start: [f64; 2], heading: f64, length: f64) -> Result<Self, PathError> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(PathError::InvalidParameter(format!(
                "straight length must be positive, got {length}"
            )));
        }
        let end = [
            start[0] + length * heading.cos(),
            start[1] + length * heading.sin(),
        ];
        Self::from_waypoints(&[start, end], false)
    }

    /// Exact counter-clockwise circle starting at polar angle `start_angle`.
    pub fn circle(center: [f64; 2], radius: f64, start_angle: f64) -> Result<Self, PathError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(PathError::InvalidParameter(format!(
                "circle radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            geometry: Geometry::Circle {
                center,
                radius,
                start_angle,
            },
            total_length: TAU * radius,
            closed: true,
        })
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Maps `s` into `[0, total_length)` on closed paths; checks range on
    /// open ones.
    pub fn normalize_s(&self, s: f64) -> Result<f64, PathError> {
        if !s.is_finite() {
            return Err(PathError::OutOfRange {
                s,
                length: self.total_length,
            });
        }
        if self.closed {
            let wrapped = s.rem_euclid(self.total_length);
            // rem_euclid can round up to the modulus itself
            Ok(if wrapped >= self.total_length {
                0.0
            } else {
                wrapped
            })
        } else if s < -RANGE_SLACK || s > self.total_length + RANGE_SLACK {
            Err(PathError::OutOfRange {
                s,
                length: self.total_length,
            })
        } else {
            Ok(s.clamp(0.0, self.total_length))
        }
    }

    /// Signed arc-length difference `ahead − behind`. On closed paths the
    /// representative in (−L/2, L/2] is returned.
    pub fn arc_difference(&self, ahead: f64, behind: f64) -> f64 {
        let d = ahead - behind;
        if !self.closed {
            return d;
        }
        let l = self.total_length;
        let m = d.rem_euclid(l);
        if m > 0.5 * l {
            m - l
        } else {
            m
        }
    }

    pub fn point_at(&self, s: f64) -> Result<PathPose, PathError> {
        let s = self.normalize_s(s)?;
        Ok(self.pose_unchecked(s))
    }

    fn pose_unchecked(&self, s: f64) -> PathPose {
        match &self.geometry {
            Geometry::Spline(curve) => curve.pose(curve.u_at(s)),
            Geometry::Circle {
                center,
                radius,
                start_angle,
            } => {
                let phi = start_angle + s / radius;
                PathPose {
                    position: [
                        center[0] + radius * phi.cos(),
                        center[1] + radius * phi.sin(),
                    ],
                    heading: wrap_angle(phi + 0.5 * PI),
                    curvature: 1.0 / radius,
                    curvature_rate: 0.0,
                }
            }
        }
    }

    /// Largest |curvature| over a dense sample of the path.
    pub fn max_abs_curvature(&self) -> f64 {
        match &self.geometry {
            Geometry::Circle { radius, .. } => 1.0 / radius,
            Geometry::Spline(_) => {
                let samples = (self.total_length / 0.1).ceil().max(1.0) as usize;
                (0..=samples)
                    .map(|k| {
                        let s = self.total_length * k as f64 / samples as f64;
                        let s = if self.closed && k == samples { 0.0 } else { s };
                        self.pose_unchecked(s).curvature.abs()
                    })
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Orthogonal projection of `point` onto the path.
    ///
    /// With a hint the search starts there and stays local; without one the
    /// whole path is bracketed on a coarse grid and the closest local minimum
    /// wins. Several equally close minima without a hint is an error.
    pub fn project(&self, point: [f64; 2], s_hint: Option<f64>) -> Result<Projection, PathError> {
        if !(point[0].is_finite() && point[1].is_finite()) {
            return Err(PathError::InvalidParameter("non-finite point".into()));
        }
        let projection = match &self.geometry {
            Geometry::Circle {
                center,
                radius,
                start_angle,
            } => {
                let dx = point[0] - center[0];
                let dy = point[1] - center[1];
                let rho = dx.hypot(dy);
                if rho < 1e-12 * radius {
                    return Err(PathError::ProjectionAmbiguous {
                        x: point[0],
                        y: point[1],
                    });
                }
                let phi = (dy.atan2(dx) - start_angle).rem_euclid(TAU);
                let s = phi * radius;
                Projection {
                    s: if s >= self.total_length { 0.0 } else { s },
                    y_tilde: radius - rho,
                }
            }
            Geometry::Spline(_) => {
                let local = match s_hint {
                    Some(hint) => {
                        let hint = self.normalize_s(hint)?;
                        self.newton_project(point, hint, 5.0)
                    }
                    None => None,
                };
                match local {
                    Some(p) => p,
                    None => self.global_project(point, s_hint.is_some())?,
                }
            }
        };
        let pose = self.pose_unchecked(projection.s);
        if projection.y_tilde * pose.curvature >= 1.0 {
            return Err(PathError::ProjectionAmbiguous {
                x: point[0],
                y: point[1],
            });
        }
        Ok(projection)
    }

    /// Newton iteration on d/ds ‖p − c(s)‖² from `start`. Gives up (returns
    /// `None`) if it wanders more than `window` meters or fails to converge.
    fn newton_project(&self, point: [f64; 2], start: f64, window: f64) -> Option<Projection> {
        let mut s = start;
        let mut travelled = 0.0;
        for _ in 0..60 {
            let pose = self.pose_unchecked(s);
            let (along, lateral) = offsets(&pose, point);
            let slope = 1.0 - pose.curvature * lateral;
            if slope <= 1e-6 {
                return None;
            }
            let step = (along / slope).clamp(-PROJECTION_GRID, PROJECTION_GRID);
            let mut next = s + step;
            if self.closed {
                next = next.rem_euclid(self.total_length);
            } else if next < 0.0 || next > self.total_length {
                next = next.clamp(0.0, self.total_length);
                if next == s {
                    // pinned at an end with the minimum beyond it
                    return (along.abs() < PROJECTION_TOL).then_some(Projection {
                        s,
                        y_tilde: lateral,
                    });
                }
            }
            travelled += step.abs();
            if travelled > window {
                return None;
            }
            s = next;
            if step.abs() < PROJECTION_TOL {
                let pose = self.pose_unchecked(s);
                let (along, lateral) = offsets(&pose, point);
                if along.abs() > 1e-6 {
                    return None;
                }
                return Some(Projection {
                    s,
                    y_tilde: lateral,
                });
            }
        }
        None
    }

    fn global_project(&self, point: [f64; 2], had_hint: bool) -> Result<Projection, PathError> {
        let l = self.total_length;
        let count = (l / PROJECTION_GRID).ceil().max(2.0) as usize;
        let spacing = l / count as f64;
        let samples: Vec<(f64, f64)> = (0..=count)
            .filter(|&k| !(self.closed && k == count))
            .map(|k| {
                let s = k as f64 * spacing;
                (s, distance(self.pose_unchecked(s).position, point))
            })
            .collect();
        let m = samples.len();
        let mut candidates = Vec::new();
        for k in 0..m {
            let here = samples[k].1;
            let prev = if k > 0 {
                Some(samples[k - 1].1)
            } else if self.closed {
                Some(samples[m - 1].1)
            } else {
                None
            };
            let next = if k + 1 < m {
                Some(samples[k + 1].1)
            } else if self.closed {
                Some(samples[0].1)
            } else {
                None
            };
            if prev.is_none_or(|p| here <= p) && next.is_none_or(|n| here <= n) {
                candidates.push(samples[k].0);
            }
        }

        let mut refined: Vec<(f64, Projection)> = Vec::new();
        let mut hit_end = false;
        for start in candidates {
            match self.newton_project(point, start, 2.0 * PROJECTION_GRID) {
                Some(p) => {
                    let d = distance(self.pose_unchecked(p.s).position, point);
                    refined.push((d, p));
                }
                None => {
                    if !self.closed && (start == 0.0 || start == l) {
                        hit_end = true;
                    }
                }
            }
        }
        refined.sort_by(|a, b| a.0.total_cmp(&b.0));
        let Some(&(best_d, best)) = refined.first() else {
            return Err(if hit_end {
                PathError::OutOfRange { s: 0.0, length: l }
            } else {
                PathError::ProjectionAmbiguous {
                    x: point[0],
                    y: point[1],
                }
            });
        };
        if !had_hint {
            let tie = refined.iter().skip(1).any(|(d, p)| {
                (d - best_d).abs() <= 1e-9 * best_d.max(1.0)
                    && self.arc_difference(p.s, best.s).abs() > 1e-6
            });
            if tie {
                return Err(PathError::ProjectionAmbiguous {
                    x: point[0],
                    y: point[1],
                });
            }
        }
        Ok(best)
    }
}

/// Along-track and left-normal components of `point − pose.position`.
fn offsets(pose: &PathPose, point: [f64; 2]) -> (f64, f64) {
    let dx = point[0] - pose.position[0];
    let dy = point[1] - pose.position[1];
    let t = pose.tangent();
    let n = pose.normal();
    (dx * t[0] + dy * t[1], dx * n[0] + dy * n[1])
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Interpolating cubic spline in a chord-length parameter, with an arc-length
/// lookup table.
#[derive(Debug, Clone, PartialEq)]
struct SplineCurve {
    knots: Vec<f64>,
    /// Per-segment power-basis coefficients in `t = u − knots[k]`.
    cx: Vec<[f64; 4]>,
    cy: Vec<[f64; 4]>,
    table_u: Vec<f64>,
    table_s: Vec<f64>,
}

impl SplineCurve {
    fn new(waypoints: &[[f64; 2]], closed: bool) -> Self {
        let mut points = waypoints.to_vec();
        if closed {
            points.push(waypoints[0]);
        }
        let mut knots = Vec::with_capacity(points.len());
        knots.push(0.0);
        for w in points.windows(2) {
            let last = *knots.last().unwrap();
            knots.push(last + distance(w[0], w[1]));
        }
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
        let cx = spline_coefficients(&knots, &xs, closed);
        let cy = spline_coefficients(&knots, &ys, closed);
        let mut curve = Self {
            knots,
            cx,
            cy,
            table_u: Vec::new(),
            table_s: Vec::new(),
        };
        curve.build_table();
        curve
    }

    fn build_table(&mut self) {
        let mut table_u = vec![self.knots[0]];
        let mut table_s = vec![0.0];
        for k in 0..self.knots.len() - 1 {
            let (a, b) = (self.knots[k], self.knots[k + 1]);
            let speed = |u: f64| self.speed(u);
            let seg_len = adaptive_gauss_legendre(&speed, a, b, 1e-12, 24);
            let pieces = (seg_len / TABLE_RESOLUTION).ceil().max(1.0) as usize;
            let mut s = *table_s.last().unwrap();
            for j in 0..pieces {
                let u0 = a + (b - a) * j as f64 / pieces as f64;
                let u1 = if j + 1 == pieces {
                    b
                } else {
                    a + (b - a) * (j + 1) as f64 / pieces as f64
                };
                s += gauss_legendre5(&speed, u0, u1);
                table_u.push(u1);
                table_s.push(s);
            }
        }
        self.table_u = table_u;
        self.table_s = table_s;
    }

    fn segment(&self, u: f64) -> usize {
        let k = self.knots.partition_point(|&knot| knot <= u);
        k.saturating_sub(1).min(self.knots.len() - 2)
    }

    /// Position and first three derivatives of `(x, y)` with respect to `u`.
    fn derivatives(&self, u: f64) -> [[f64; 2]; 4] {
        let k = self.segment(u);
        let t = u - self.knots[k];
        let eval = |c: &[f64; 4]| {
            [
                c[0] + t * (c[1] + t * (c[2] + t * c[3])),
                c[1] + t * (2.0 * c[2] + 3.0 * t * c[3]),
                2.0 * c[2] + 6.0 * t * c[3],
                6.0 * c[3],
            ]
        };
        let x = eval(&self.cx[k]);
        let y = eval(&self.cy[k]);
        [[x[0], y[0]], [x[1], y[1]], [x[2], y[2]], [x[3], y[3]]]
    }

    fn speed(&self, u: f64) -> f64 {
        let d = self.derivatives(u);
        d[1][0].hypot(d[1][1])
    }

    /// Chord parameter at arc length `s` (table lookup, then Newton).
    fn u_at(&self, s: f64) -> f64 {
        let j = self
            .table_s
            .partition_point(|&v| v <= s)
            .saturating_sub(1)
            .min(self.table_s.len() - 2);
        let (u0, s0) = (self.table_u[j], self.table_s[j]);
        let (u_lo, u_hi) = (u0, self.table_u[j + 1]);
        let speed = |u: f64| self.speed(u);
        let mut u = u0 + (s - s0) / speed(u0);
        for _ in 0..8 {
            u = u.clamp(u_lo, u_hi);
            let f = s0 + gauss_legendre5(&speed, u0, u) - s;
            let step = f / speed(u);
            u -= step;
            if step.abs() < 1e-14 * (1.0 + u.abs()) {
                break;
            }
        }
        u.clamp(u_lo, u_hi)
    }

    fn pose(&self, u: f64) -> PathPose {
        let [p, d1, d2, d3] = self.derivatives(u);
        let speed2 = d1[0] * d1[0] + d1[1] * d1[1];
        let speed = speed2.sqrt();
        let cross = d1[0] * d2[1] - d1[1] * d2[0];
        let dot = d1[0] * d2[0] + d1[1] * d2[1];
        let cross_rate = d1[0] * d3[1] - d1[1] * d3[0];
        let curvature = cross / (speed2 * speed);
        let dchi_du = cross_rate / (speed2 * speed) - 3.0 * cross * dot / (speed2 * speed2 * speed);
        PathPose {
            position: p,
            heading: d1[1].atan2(d1[0]),
            curvature,
            curvature_rate: dchi_du / speed,
        }
    }
}

/// Cubic spline coefficients per segment. Natural end conditions for open
/// data; periodic for closed data whose last value repeats the first.
fn spline_coefficients(knots: &[f64], values: &[f64], periodic: bool) -> Vec<[f64; 4]> {
    let n = knots.len() - 1;
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<f64> = (0..n).map(|k| (values[k + 1] - values[k]) / h[k]).collect();

    // second derivatives at the knots
    let m: Vec<f64> = if periodic {
        // unknowns m_0..m_{n-1}, m_n = m_0
        let size = n;
        let mut sub = vec![0.0; size];
        let mut diag = vec![0.0; size];
        let mut sup = vec![0.0; size];
        let mut rhs = vec![0.0; size];
        for i in 0..size {
            let h_prev = h[(i + n - 1) % n];
            let h_next = h[i];
            sub[i] = h_prev;
            diag[i] = 2.0 * (h_prev + h_next);
            sup[i] = h_next;
            rhs[i] = 6.0 * (slope[i] - slope[(i + n - 1) % n]);
        }
        let mut m = solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs);
        m.push(m[0]);
        m
    } else if n == 1 {
        vec![0.0, 0.0]
    } else {
        let size = n - 1;
        let mut sub = vec![0.0; size];
        let mut diag = vec![0.0; size];
        let mut sup = vec![0.0; size];
        let mut rhs = vec![0.0; size];
        for i in 0..size {
            sub[i] = h[i];
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            sup[i] = h[i + 1];
            rhs[i] = 6.0 * (slope[i + 1] - slope[i]);
        }
        let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs);
        let mut m = Vec::with_capacity(n + 1);
        m.push(0.0);
        m.extend(inner);
        m.push(0.0);
        m
    };

    (0..n)
        .map(|k| {
            [
                values[k],
                slope[k] - h[k] * (2.0 * m[k] + m[k + 1]) / 6.0,
                0.5 * m[k],
                (m[k + 1] - m[k]) / (6.0 * h[k]),
            ]
        })
        .collect()
}

/// Thomas algorithm; `sub[0]` and `sup[last]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Cyclic tridiagonal solve via Sherman–Morrison. `sub[0]` couples row 0 to
/// the last unknown and `sup[last]` couples the last row to unknown 0.
fn solve_cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 2 {
        // both off-diagonal couplings land on the same entry
        let a = diag[0];
        let b = sup[0] + sub[0];
        let c = sub[1] + sup[1];
        let d = diag[1];
        let det = a * d - b * c;
        return vec![
            (rhs[0] * d - b * rhs[1]) / det,
            (a * rhs[1] - c * rhs[0]) / det,
        ];
    }
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut modified = diag.to_vec();
    modified[0] -= gamma;
    modified[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(sub, &modified, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(sub, &modified, sup, &u);
    let factor = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - factor * zi).collect()
}

const GL5_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664_0,
    0.906_179_845_938_664_0,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

fn gauss_legendre5(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    half * GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

/// Recursive bisection until the two-half estimate agrees with the whole.
fn adaptive_gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let whole = gauss_legendre5(f, a, b);
    let mid = 0.5 * (a + b);
    let left = gauss_legendre5(f, a, mid);
    let right = gauss_legendre5(f, mid, b);
    if depth == 0 || (left + right - whole).abs() <= tol * (1.0 + whole.abs()) {
        left + right
    } else {
        adaptive_gauss_legendre(f, a, mid, tol, depth - 1)
            + adaptive_gauss_legendre(f, mid, b, tol, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s_curve() -> ReferencePath {
        let pts: Vec<[f64; 2]> = (0..=12)
            .map(|k| {
                let x = 25.0 * k as f64;
                [x, 30.0 * (x / 60.0).sin()]
            })
            .collect();
        ReferencePath::from_waypoints(&pts, false).unwrap()
    }

    fn sampled_circle(radius: f64, count: usize) -> ReferencePath {
        let pts: Vec<[f64; 2]> = (0..count)
            .map(|k| {
                let phi = TAU * k as f64 / count as f64;
                [radius * phi.cos(), radius * phi.sin()]
            })
            .collect();
        ReferencePath::from_waypoints(&pts, true).unwrap()
    }

    #[test]
    fn straight_waypoints_have_zero_curvature() {
        let path = ReferencePath::from_waypoints(&[[0.0, 0.0], [100.0, 0.0]], false).unwrap();
        assert!((path.total_length() - 100.0).abs() < 1e-9);
        for k in 0..=100 {
            let pose = path.point_at(k as f64).unwrap();
            assert_eq!(pose.curvature, 0.0);
        }
        let pose = path.point_at(5.0).unwrap();
        assert!((pose.position[0] - 5.0).abs() < 1e-12);
        assert_eq!(pose.position[1], 0.0);
        assert_eq!(pose.heading, 0.0);
    }

    #[test]
    fn sampled_circle_curvature_matches_radius() {
        let path = sampled_circle(20.0, 32);
        let l = path.total_length();
        for k in 0..2000 {
            let pose = path.point_at(l * k as f64 / 2000.0).unwrap();
            assert!((pose.curvature - 0.05).abs() < 1e-3, "{}", pose.curvature);
        }
    }

    #[test]
    fn exact_circle_quarter_arc() {
        let path = ReferencePath::circle([0.0, 0.0], 20.0, 0.0).unwrap();
        let pose = path.point_at(PI * 20.0 / 2.0).unwrap();
        assert!(pose.position[0].abs() < 1e-12);
        assert!((pose.position[1] - 20.0).abs() < 1e-12);
        assert!((pose.heading - PI).abs() < 1e-12);
        assert_eq!(pose.curvature, 0.05);
    }

    #[test]
    fn curvature_matches_heading_finite_differences() {
        let path = s_curve();
        let l = path.total_length();
        let h = 1e-4;
        for k in 1..1000 {
            let s = (l - 2.0 * h) * k as f64 / 1000.0 + h;
            let ahead = path.point_at(s + h).unwrap().heading;
            let behind = path.point_at(s - h).unwrap().heading;
            let fd = wrap_angle(ahead - behind) / (2.0 * h);
            let chi = path.point_at(s).unwrap().curvature;
            assert!((fd - chi).abs() < 1e-3, "s={s}: fd {fd} vs {chi}");
        }
    }

    #[test]
    fn curvature_rate_matches_finite_differences() {
        let path = s_curve();
        let h = 1e-4;
        // stay away from knots where the rate jumps
        for s in [10.0, 40.0, 90.0, 130.0, 210.0] {
            let fd = (path.point_at(s + h).unwrap().curvature
                - path.point_at(s - h).unwrap().curvature)
                / (2.0 * h);
            let rate = path.point_at(s).unwrap().curvature_rate;
            assert!((fd - rate).abs() < 1e-6, "s={s}: {fd} vs {rate}");
        }
    }

    #[test]
    fn arc_length_matches_dense_chord_sum() {
        // dense polyline oracle: sum of chords over 2e5 samples in s
        let path = s_curve();
        let (s1, s2) = (17.3, 241.9);
        let n = 200_000;
        let mut prev = path.point_at(s1).unwrap().position;
        let mut chord = 0.0;
        for k in 1..=n {
            let p = path
                .point_at(s1 + (s2 - s1) * k as f64 / n as f64)
                .unwrap()
                .position;
            chord += distance(prev, p);
            prev = p;
        }
        assert!(((chord - (s2 - s1)) / (s2 - s1)).abs() < 1e-6);
    }

    #[test]
    fn point_at_matches_dense_resampling_oracle() {
        // integrate chord lengths along the raw spline parameter, then look
        // up positions by arc length without using the path's own table
        let path = s_curve();
        let Geometry::Spline(curve) = &path.geometry else {
            unreachable!()
        };
        let u_end = *curve.knots.last().unwrap();
        let n = 400_000;
        let mut arc = vec![0.0];
        let mut pts = vec![curve.derivatives(0.0)[0]];
        for k in 1..=n {
            let p = curve.derivatives(u_end * k as f64 / n as f64)[0];
            arc.push(arc[k - 1] + distance(pts[k - 1], p));
            pts.push(p);
        }
        for s in [3.0, 57.5, 120.25, 199.0, 260.0] {
            let j = arc.partition_point(|&a| a <= s) - 1;
            let f = (s - arc[j]) / (arc[j + 1] - arc[j]);
            let oracle = [
                pts[j][0] + f * (pts[j + 1][0] - pts[j][0]),
                pts[j][1] + f * (pts[j + 1][1] - pts[j][1]),
            ];
            let got = path.point_at(s).unwrap().position;
            assert!(distance(oracle, got) < 1e-4, "s={s}");
        }
    }

    #[test]
    fn errors_on_bad_waypoints() {
        assert_eq!(
            ReferencePath::from_waypoints(&[[0.0, 0.0]], false),
            Err(PathError::TooFewWaypoints {
                required: 2,
                got: 1
            })
        );
        assert_eq!(
            ReferencePath::from_waypoints(&[[0.0, 0.0], [1.0, 0.0], [1.0, 0.0]], false),
            Err(PathError::DuplicateWaypoint {
                first: 1,
                second: 2
            })
        );
        assert!(matches!(
            ReferencePath::from_waypoints(&[[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]], true),
            Err(PathError::DuplicateWaypoint {
                first: 2,
                second: 0
            })
        ));
    }

    #[test]
    fn open_path_range_checks() {
        let path = s_curve();
        assert!(matches!(
            path.point_at(-1.0),
            Err(PathError::OutOfRange { .. })
        ));
        assert!(matches!(
            path.point_at(path.total_length() + 1.0),
            Err(PathError::OutOfRange { .. })
        ));
        let circle = ReferencePath::circle([0.0, 0.0], 20.0, 0.0).unwrap();
        let a = circle.point_at(-1.0).unwrap();
        let b = circle.point_at(circle.total_length() - 1.0).unwrap();
        assert!(distance(a.position, b.position) < 1e-9);
    }

    #[test]
    fn projection_examples() {
        let straight = ReferencePath::straight([0.0, 0.0], 0.0, 100.0).unwrap();
        let p = straight.project([12.0, 0.0], None).unwrap();
        assert!((p.s - 12.0).abs() < 1e-9 && p.y_tilde.abs() < 1e-12);
        let p = straight.project([5.0, 3.0], None).unwrap();
        assert!((p.s - 5.0).abs() < 1e-9 && (p.y_tilde - 3.0).abs() < 1e-12);
        assert!(matches!(
            straight.project([-5.0, 1.0], None),
            Err(PathError::OutOfRange { .. })
        ));
    }

    #[test]
    fn circle_projection_against_brute_force() {
        let phi = PI / 4.0;
        let point = [22.0 * phi.cos(), 22.0 * phi.sin()];
        for path in [
            ReferencePath::circle([0.0, 0.0], 20.0, 0.0).unwrap(),
            sampled_circle(20.0, 64),
        ] {
            // brute force over 1e5 samples
            let n = 100_000;
            let l = path.total_length();
            let (mut best_s, mut best_d) = (0.0, f64::INFINITY);
            for k in 0..n {
                let s = l * k as f64 / n as f64;
                let d = distance(path.point_at(s).unwrap().position, point);
                if d < best_d {
                    best_d = d;
                    best_s = s;
                }
            }
            let p = path.project(point, None).unwrap();
            assert!(
                (p.s - best_s).abs() <= l / n as f64,
                "{} vs {}",
                p.s,
                best_s
            );
            assert!((p.y_tilde.abs() - best_d).abs() < 1e-6);
            // outward is to the right of a counter-clockwise tangent
            assert!(p.y_tilde < 0.0);
        }
        let exact = ReferencePath::circle([0.0, 0.0], 20.0, 0.0).unwrap();
        let p = exact.project(point, None).unwrap();
        assert!((p.s - 20.0 * PI / 4.0).abs() < 1e-12);
        assert!((p.y_tilde + 2.0).abs() < 1e-12);
    }

    #[test]
    fn projection_of_circle_center_is_ambiguous() {
        let exact = ReferencePath::circle([0.0, 0.0], 20.0, 0.0).unwrap();
        assert!(matches!(
            exact.project([0.0, 0.0], None),
            Err(PathError::ProjectionAmbiguous { .. })
        ));
        let sampled = sampled_circle(20.0, 32);
        assert!(sampled.project([0.0, 0.0], None).is_err());
    }

    #[test]
    fn arc_difference_wraps_on_closed_paths() {
        let circle = ReferencePath::circle([0.0, 0.0], 10.0, 0.0).unwrap();
        let l = circle.total_length();
        assert!((circle.arc_difference(1.0, l - 1.0) - 2.0).abs() < 1e-12);
        assert!((circle.arc_difference(l - 1.0, 1.0) + 2.0).abs() < 1e-12);
        let straight = ReferencePath::straight([0.0, 0.0], 0.0, 100.0).unwrap();
        assert_eq!(straight.arc_difference(10.0, 30.0), -20.0);
    }

    #[test]
    fn hinted_projection_is_continuous_along_a_trajectory() {
        let path = s_curve();
        let mut hint = 5.0;
        for k in 0..2000 {
            let s = 5.0 + 0.1 * k as f64;
            let point = path
                .point_at(s)
                .unwrap()
                .offset(1.5 * (0.01 * k as f64).sin());
            let p = path.project(point, Some(hint)).unwrap();
            assert!((p.s - hint).abs() <= 0.1 + 1e-6);
            hint = p.s;
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn projection_round_trip(frac in 0.0f64..1.0, y in -9.0f64..9.0) {
            let path = s_curve();
            let s = frac * path.total_length();
            let pose = path.point_at(s).unwrap();
            prop_assume!(y * pose.curvature < 0.9);
            let p = path.project(pose.offset(y), Some(s)).unwrap();
            prop_assert!((p.s - s).abs() < 1e-6);
            prop_assert!((p.y_tilde - y).abs() < 1e-6);
        }

        #[test]
        fn closed_round_trip(frac in 0.0f64..1.0, y in -5.0f64..5.0) {
            let path = sampled_circle(20.0, 32);
            let s = frac * path.total_length();
            let point = path.point_at(s).unwrap().offset(y);
            let p = path.project(point, Some(s)).unwrap();
            prop_assert!(path.arc_difference(p.s, s).abs() < 1e-6);
            prop_assert!((p.y_tilde - y).abs() < 1e-6);
        }
    }
}
