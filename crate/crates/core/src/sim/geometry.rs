//! Oriented-rectangle overlap by the separating-axis test.

use super::types::VehicleState;

type Vec2 = [f64; 2];

fn corners(s: &VehicleState) -> [Vec2; 4] {
    let (sin, cos) = s.heading.sin_cos();
    let hl = s.length / 2.0;
    let hw = s.width / 2.0;
    let f = [cos * hl, sin * hl];
    let l = [-sin * hw, cos * hw];
    [
        [s.x + f[0] + l[0], s.y + f[1] + l[1]],
        [s.x + f[0] - l[0], s.y + f[1] - l[1]],
        [s.x - f[0] - l[0], s.y - f[1] - l[1]],
        [s.x - f[0] + l[0], s.y - f[1] + l[1]],
    ]
}

fn axes(s: &VehicleState) -> [Vec2; 2] {
    let (sin, cos) = s.heading.sin_cos();
    [[cos, sin], [-sin, cos]]
}

fn project(pts: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in pts {
        let d = p[0] * axis[0] + p[1] * axis[1];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// True iff the two vehicle footprints overlap with positive area.
/// Touching edges do not count as a collision.
pub fn collision_check(a: &VehicleState, b: &VehicleState) -> bool {
    // Cheap reject on bounding circles.
    let ra = a.length.hypot(a.width) / 2.0;
    let rb = b.length.hypot(b.width) / 2.0;
    if (a.x - b.x).hypot(a.y - b.y) >= ra + rb {
        return false;
    }
    let ca = corners(a);
    let cb = corners(b);
    for axis in axes(a).into_iter().chain(axes(b)) {
        let (a_lo, a_hi) = project(&ca, axis);
        let (b_lo, b_hi) = project(&cb, axis);
        if a_hi <= b_lo || b_hi <= a_lo {
            return false;
        }
    }
    true
}
