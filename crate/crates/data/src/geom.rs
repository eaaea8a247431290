//! Planar geometry primitives: axis-aligned rectangles, convex polygon
//! clipping (Sutherland-Hodgman against half-planes), and exact shoelace
//! areas.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Signed shoelace area; positive for counter-clockwise winding.
pub fn polygon_signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s
}

pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    polygon_signed_area(poly).abs()
}

/// True if the polygon is convex (vertices in consistent winding, no
/// reflex turns; collinear runs allowed).
pub fn is_convex(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0.0f64;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cross != 0.0 {
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
    }
    true
}

/// Clips a convex polygon against an axis-aligned rectangle; the result is
/// convex (possibly empty).
pub fn clip_polygon_rect(poly: &[[f64; 2]], rect: &Rect) -> Vec<[f64; 2]> {
    // Each pass keeps the half-plane side(p) >= 0.
    let planes: [(usize, f64, f64); 4] = [
        (0, 1.0, -rect.x0), // x >= x0
        (0, -1.0, rect.x1), // x <= x1
        (1, 1.0, -rect.y0), // y >= y0
        (1, -1.0, rect.y1), // y <= y1
    ];
    let mut cur = poly.to_vec();
    for (axis, scale, offset) in planes {
        if cur.is_empty() {
            break;
        }
        let side = |p: &[f64; 2]| p[axis] * scale + offset;
        let mut next = Vec::with_capacity(cur.len() + 2);
        for i in 0..cur.len() {
            let a = cur[i];
            let b = cur[(i + 1) % cur.len()];
            let (sa, sb) = (side(&a), side(&b));
            if sa >= 0.0 {
                next.push(a);
            }
            if (sa > 0.0 && sb < 0.0) || (sa < 0.0 && sb > 0.0) {
                let t = sa / (sa - sb);
                next.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        cur = next;
    }
    cur
}

/// Regular polygon approximating a circle with the radius adjusted so the
/// polygon area equals the circle area exactly.
pub fn circle_polygon(cx: f64, cy: f64, r: f64, sides: usize) -> Vec<[f64; 2]> {
    let n = sides.max(8);
    // inscribed n-gon area = 1/2 n r^2 sin(2 pi / n); scale r to match pi r^2
    let theta = 2.0 * std::f64::consts::PI / n as f64;
    let r_eq = r * (theta / theta.sin()).sqrt();
    (0..n)
        .map(|i| {
            let a = theta * i as f64;
            [cx + r_eq * a.cos(), cy + r_eq * a.sin()]
        })
        .collect()
}
