use toolchat_core::codec::{denormalize_bbox, normalize_bbox, PixelBox};

use crate::{ensure, Check};

const N: usize = 64;

/// Every box whose corners lie on a 64x64 grid of pixel positions.
fn check_extent(w: f64, h: f64) -> Result<usize, String> {
    let xs: Vec<f64> = (0..N).map(|i| i as f64 * w / (N - 1) as f64).collect();
    let ys: Vec<f64> = (0..N).map(|i| i as f64 * h / (N - 1) as f64).collect();
    let (tol_x, tol_y) = (w / 2000.0, h / 2000.0);
    let mut boxes = 0;
    for (i, &x1) in xs.iter().enumerate() {
        for &x2 in &xs[i..] {
            for (j, &y1) in ys.iter().enumerate() {
                for &y2 in &ys[j..] {
                    let px = PixelBox::new(x1, y1, x2, y2);
                    let nb = normalize_bbox(px, w, h).map_err(|e| e.to_string())?;
                    let c = nb.coords();
                    ensure(c.iter().all(|&v| v <= 1000) && c[0] <= c[2] && c[1] <= c[3], || {
                        format!("{px:?} -> {c:?}")
                    })?;
                    let back = denormalize_bbox(nb, w, h).map_err(|e| e.to_string())?;
                    let ok = (back.x1 - x1).abs() <= tol_x
                        && (back.x2 - x2).abs() <= tol_x
                        && (back.y1 - y1).abs() <= tol_y
                        && (back.y2 - y2).abs() <= tol_y;
                    ensure(ok, || format!("{px:?} -> {c:?} -> {back:?} at {w}x{h}"))?;
                    boxes += 1;
                }
            }
        }
    }
    Ok(boxes)
}

pub fn run() -> Check {
    let mut total = 0;
    for (w, h) in [(640.0, 480.0), (1920.0, 1080.0), (333.0, 77.0)] {
        total += check_extent(w, h)?;
    }
    Ok(format!("{total} boxes over 3 extents within extent/2000"))
}
