//! Exact orientation and in-circle tests (adaptive-precision arithmetic).

use robust::Coord;

use super::Point;

fn coord(p: Point) -> Coord<f64> {
    Coord { x: p.x, y: p.y }
}

/// Positive when `a, b, c` wind counterclockwise, zero when collinear.
/// The sign is exact; the magnitude approximates twice the signed area.
#[inline]
pub fn orient2d(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counterclockwise triangle `a, b, c`; zero when cocircular.
#[inline]
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    robust::incircle(coord(a), coord(b), coord(c), coord(d))
}

/// `p` lies strictly inside the segment `a b`, given that the three are
/// collinear.
pub fn strictly_between(a: Point, b: Point, p: Point) -> bool {
    if a.x != b.x {
        (a.x < p.x && p.x < b.x) || (b.x < p.x && p.x < a.x)
    } else {
        (a.y < p.y && p.y < b.y) || (b.y < p.y && p.y < a.y)
    }
}
