//! Exact squared Euclidean distance transform on anisotropic voxel grids,
//! using the lower-envelope-of-parabolas method one axis at a time.

use crate::parallel;
use crate::volume::Geometry;

/// Squared physical distance from every voxel to the nearest `true` voxel of
/// `features`; `f64::INFINITY` everywhere when there are none.
pub fn squared_distance_transform(geometry: &Geometry, features: &[bool]) -> Vec<f64> {
    assert_eq!(features.len(), geometry.num_voxels());
    let [nz, ny, nx] = geometry.extent3();
    let [sz, sy, sx] = geometry.spacing3();
    let mut dist: Vec<f64> = features
        .iter()
        .map(|&f| if f { 0.0 } else { f64::INFINITY })
        .collect();

    // x: contiguous rows
    parallel::for_each_chunk_mut(&mut dist, nx, |_, row| {
        let mut scratch = Envelope::new(nx);
        let input = row.to_vec();
        scratch.transform(&input, sx, row);
    });

    // y: columns inside each z slab
    if ny > 1 {
        parallel::for_each_chunk_mut(&mut dist, ny * nx, |_, slab| {
            let mut scratch = Envelope::new(ny);
            let mut line = vec![0.0; ny];
            let mut out = vec![0.0; ny];
            for x in 0..nx {
                for (y, l) in line.iter_mut().enumerate() {
                    *l = slab[y * nx + x];
                }
                scratch.transform(&line, sy, &mut out);
                for (y, &o) in out.iter().enumerate() {
                    slab[y * nx + x] = o;
                }
            }
        });
    }

    // z: one line per (y, x), computed in parallel then scattered
    if nz > 1 {
        let plane = ny * nx;
        let lines = parallel::map_indices(plane, |p| {
            let line: Vec<f64> = (0..nz).map(|z| dist[z * plane + p]).collect();
            let mut out = vec![0.0; nz];
            Envelope::new(nz).transform(&line, sz, &mut out);
            out
        });
        for (p, line) in lines.into_iter().enumerate() {
            for (z, d) in line.into_iter().enumerate() {
                dist[z * plane + p] = d;
            }
        }
    }
    dist
}

struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Self {
            sites: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }

    /// `out[q] = min_p f[p] + ((q - p) * spacing)^2`.
    fn transform(&mut self, f: &[f64], spacing: f64, out: &mut [f64]) {
        let n = f.len();
        let Some(first) = f.iter().position(|v| v.is_finite()) else {
            out.fill(f64::INFINITY);
            return;
        };
        let pos = |i: usize| i as f64 * spacing;
        let mut k = 0usize;
        self.sites[0] = first;
        self.bounds[0] = f64::NEG_INFINITY;
        self.bounds[1] = f64::INFINITY;
        for q in first + 1..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + pos(q) * pos(q);
            loop {
                let p = self.sites[k];
                let s = (fq - (f[p] + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)));
                if s <= self.bounds[k] {
                    // bounds[0] is -inf, so k never underflows here
                    k -= 1;
                } else {
                    k += 1;
                    self.sites[k] = q;
                    self.bounds[k] = s;
                    self.bounds[k + 1] = f64::INFINITY;
                    break;
                }
            }
        }
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            while self.bounds[k + 1] < pos(q) {
                k += 1;
            }
            let p = self.sites[k];
            let d = (q as f64 - p as f64) * spacing;
            *o = d * d + f[p];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(geometry: &Geometry, features: &[bool]) -> Vec<f64> {
        let sp = geometry.spacing3();
        let coords = |i: usize| {
            let [_, ny, nx] = geometry.extent3();
            [i / (ny * nx), (i / nx) % ny, i % nx]
        };
        (0..features.len())
            .map(|i| {
                let a = coords(i);
                (0..features.len())
                    .filter(|&j| features[j])
                    .map(|j| {
                        let b = coords(j);
                        let d = |ax: usize| (a[ax] as f64 - b[ax] as f64) * sp[ax];
                        let (dz, dy, dx) = (d(0), d(1), d(2));
                        dx * dx + dy * dy + dz * dz
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn single_point_2d() {
        let g = Geometry::isotropic(&[5, 5]).unwrap();
        let mut f = vec![false; 25];
        f[12] = true;
        let d = squared_distance_transform(&g, &f);
        assert_eq!(d[12], 0.0);
        assert_eq!(d[0], 8.0);
        assert_eq!(d[2], 4.0);
    }

    #[test]
    fn empty_features_are_infinite() {
        let g = Geometry::isotropic(&[3, 4, 2]).unwrap();
        let d = squared_distance_transform(&g, &[false; 24]);
        assert!(d.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn matches_brute_force_anisotropic() {
        let g = Geometry::new(vec![4, 6, 5], vec![2.0, 0.5, 1.5]).unwrap();
        let f: Vec<bool> = (0..120).map(|i| (i * 37 + 11) % 17 == 0).collect();
        assert_eq!(squared_distance_transform(&g, &f), brute(&g, &f));
    }
}
