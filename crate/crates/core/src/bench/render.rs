//! Mesh wireframe rendering.

use crate::imgio::GrayImage;
use crate::mesh::TriMesh;

const BACKGROUND: f64 = 255.0;
const INK: f64 = 0.0;

/// Pixels of the Bresenham segment between two grid points, both ends
/// included.
pub fn line_pixels(from: (i64, i64), to: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = from;
    let dx = (to.0 - x).abs();
    let dy = -(to.1 - y).abs();
    let sx = if x < to.0 { 1 } else { -1 };
    let sy = if y < to.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        out.push((x, y));
        if (x, y) == to {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// White `width x height` canvas with every mesh edge drawn 1 px wide in
/// black. Vertices are rounded to the nearest pixel; parts of edges
/// outside the canvas are dropped.
pub fn render_wireframe(mesh: &TriMesh, width: usize, height: usize) -> GrayImage {
    let mut data = vec![BACKGROUND; width * height];
    let snap = |k: usize| {
        let p = mesh.vertices()[k];
        (p.x.round() as i64, p.y.round() as i64)
    };
    for (a, b) in mesh.edges() {
        for (x, y) in line_pixels(snap(a), snap(b)) {
            if (0..width as i64).contains(&x) && (0..height as i64).contains(&y) {
                data[y as usize * width + x as usize] = INK;
            }
        }
    }
    GrayImage::new(width, height, data).expect("canvas matches its dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bresenham_octants() {
        assert_eq!(
            line_pixels((0, 0), (3, 0)),
            [(0, 0), (1, 0), (2, 0), (3, 0)]
        );
        assert_eq!(line_pixels((2, 2), (0, 0)), [(2, 2), (1, 1), (0, 0)]);
        assert_eq!(line_pixels((0, 0), (1, 3)).len(), 4);
        assert_eq!(line_pixels((5, 5), (5, 5)), [(5, 5)]);
    }
}
