//! Exact Euclidean distance transform after Maurer, Qi and Raghavan.
//!
//! Squared distances are propagated one axis at a time. Each 1-D pass
//! builds the lower envelope of the parabolas `f(q) + ((q − i)·s)²` rooted
//! at the sites of a line, discarding sites whose Voronoi cell misses the
//! line, then reads the envelope back in a single forward sweep.

use crate::geometry::Volume3;

/// Squared world-space distance to the nearest nonzero voxel of `mask`,
/// or `f64::INFINITY` everywhere when the mask is empty.
pub(crate) fn squared_edt(mask: &Volume3) -> Vec<f64> {
    let mut sq: Vec<f64> = mask
        .data()
        .iter()
        .map(|&v| if v != 0.0 { 0.0 } else { f64::INFINITY })
        .collect();
    let dims = mask.dims();
    let spacing = mask.spacing();
    let mut pass = LinePass::new(*dims.iter().max().expect("three dims"));
    for axis in 0..3 {
        pass.run(&mut sq, dims, axis, spacing[axis]);
    }
    sq
}

struct LinePass {
    line: Vec<f64>,
    site_value: Vec<f64>,
    site_index: Vec<usize>,
}

impl LinePass {
    fn new(max_len: usize) -> Self {
        Self {
            line: vec![0.0; max_len],
            site_value: Vec::with_capacity(max_len),
            site_index: Vec::with_capacity(max_len),
        }
    }

    fn run(&mut self, sq: &mut [f64], dims: [usize; 3], axis: usize, spacing: f64) {
        let n = dims[axis];
        if n == 1 {
            return;
        }
        let stride = match axis {
            0 => 1,
            1 => dims[0],
            _ => dims[0] * dims[1],
        };
        // The two axes other than `axis`, enumerated as (outer, inner).
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let strides = [1, dims[0], dims[0] * dims[1]];
        for j in 0..dims[b] {
            for i in 0..dims[a] {
                let start = i * strides[a] + j * strides[b];
                for k in 0..n {
                    self.line[k] = sq[start + k * stride];
                }
                self.envelope(n, spacing);
                for k in 0..n {
                    sq[start + k * stride] = self.line[k];
                }
            }
        }
    }

    fn envelope(&mut self, n: usize, spacing: f64) {
        self.site_value.clear();
        self.site_index.clear();
        for i in 0..n {
            let f = self.line[i];
            if !f.is_finite() {
                continue;
            }
            while self.site_value.len() >= 2 {
                let l = self.site_value.len();
                let hidden = middle_is_hidden(
                    (self.site_value[l - 2], self.site_index[l - 2]),
                    (self.site_value[l - 1], self.site_index[l - 1]),
                    (f, i),
                    spacing,
                );
                if !hidden {
                    break;
                }
                self.site_value.pop();
                self.site_index.pop();
            }
            self.site_value.push(f);
            self.site_index.push(i);
        }

        let sites = self.site_value.len();
        if sites == 0 {
            return;
        }
        let dist = |l: usize, x: usize, values: &[f64], idx: &[usize]| {
            let d = (idx[l] as f64 - x as f64) * spacing;
            values[l] + d * d
        };
        let mut l = 0;
        for x in 0..n {
            let mut best = dist(l, x, &self.site_value, &self.site_index);
            while l + 1 < sites {
                let next = dist(l + 1, x, &self.site_value, &self.site_index);
                if best <= next {
                    break;
                }
                best = next;
                l += 1;
            }
            self.line[x] = best;
        }
    }
}

/// Maurer's removal test: with sites `u < v < w` on a line, the parabola of
/// `v` never reaches below both neighbours on the line's axis.
fn middle_is_hidden(u: (f64, usize), v: (f64, usize), w: (f64, usize), spacing: f64) -> bool {
    let a = (v.1 - u.1) as f64 * spacing;
    let b = (w.1 - v.1) as f64 * spacing;
    let c = a + b;
    c * v.0 - b * u.0 - a * w.0 - a * b * c > 0.0
}
