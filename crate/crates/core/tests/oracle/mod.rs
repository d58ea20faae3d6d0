//! Reference implementations written independently of the library code paths
//! they check: direct loops, explicit clamping and brute-force searches.

#![allow(dead_code)]

use rand::Rng;

/// Row-major coordinates of `index` in `dims`.
pub fn unravel(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut c = vec![0; dims.len()];
    for a in (0..dims.len()).rev() {
        c[a] = index % dims[a];
        index /= dims[a];
    }
    c
}

pub fn ravel(coords: &[isize], dims: &[usize]) -> usize {
    coords
        .iter()
        .zip(dims)
        .fold(0, |acc, (&c, &d)| acc * d + c as usize)
}

/// Off-center weights of the smoothing stencil, keyed by squared offset,
/// computed straight from the Gaussian.
pub fn reference_kernel(rank: usize, sigma: f64) -> Vec<(Vec<isize>, f64)> {
    let mut taps = Vec::new();
    let mut offsets = vec![vec![]];
    for _ in 0..rank {
        offsets = offsets
            .into_iter()
            .flat_map(|o: Vec<isize>| {
                (-1..=1).map(move |d| {
                    let mut o = o.clone();
                    o.push(d);
                    o
                })
            })
            .collect();
    }
    let g = |o: &[isize]| {
        let r2: f64 = o.iter().map(|&x| (x * x) as f64).sum();
        (-r2 / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma).powf(rank as f64 / 2.0)
    };
    let surround: f64 = offsets.iter().filter(|o| o.iter().any(|&x| x != 0)).map(|o| g(o)).sum();
    for o in offsets {
        let w = if o.iter().all(|&x| x == 0) { surround } else { g(&o) };
        taps.push((o, w / surround));
    }
    taps
}

/// Direct correlation of every one-hot plane with the stencil, clamped reads,
/// normalized by the sum of the taps. Class-major output.
pub fn naive_svls(labels: &[u8], dims: &[usize], classes: usize, sigma: f64) -> Vec<f64> {
    let kernel = reference_kernel(dims.len(), sigma);
    let total: f64 = kernel.iter().map(|(_, w)| w).sum();
    let n: usize = dims.iter().product();
    let mut out = vec![0.0; n * classes];
    for c in 0..classes {
        for v in 0..n {
            let here = unravel(v, dims);
            let mut acc = 0.0;
            for (o, w) in &kernel {
                let at: Vec<isize> = here
                    .iter()
                    .zip(o)
                    .zip(dims)
                    .map(|((&h, &d), &ext)| (h as isize + d).clamp(0, ext as isize - 1))
                    .collect();
                if labels[ravel(&at, dims)] as usize == c {
                    acc += w;
                }
            }
            out[c * n + v] = acc / total;
        }
    }
    out
}

/// Mask voxels with a face neighbor outside the mask or outside the grid.
pub fn naive_boundary(mask: &[bool], dims: &[usize]) -> Vec<usize> {
    (0..mask.len())
        .filter(|&v| {
            mask[v] && {
                let c = unravel(v, dims);
                (0..dims.len()).any(|a| {
                    [-1isize, 1].iter().any(|&d| {
                        let mut n: Vec<isize> = c.iter().map(|&x| x as isize).collect();
                        n[a] += d;
                        n[a] < 0 || n[a] >= dims[a] as isize || !mask[ravel(&n, dims)]
                    })
                })
            }
        })
        .collect()
}

/// Surface Dice from all pairwise boundary distances. Squared distances are
/// summed from the last axis to the first; the tolerance test uses the same
/// relative slack as the library.
pub fn brute_surface_dice(t: &[bool], p: &[bool], dims: &[usize], spacing: &[f64], tol: f64) -> f64 {
    let st = naive_boundary(t, dims);
    let sp = naive_boundary(p, dims);
    if st.is_empty() && sp.is_empty() {
        return 1.0;
    }
    if st.is_empty() || sp.is_empty() {
        return 0.0;
    }
    let d2 = |a: usize, b: usize| {
        let ca = unravel(a, dims);
        let cb = unravel(b, dims);
        let mut s = 0.0;
        for ax in (0..dims.len()).rev() {
            let d = (ca[ax] as f64 - cb[ax] as f64) * spacing[ax];
            s += d * d;
        }
        s
    };
    let limit = tol * tol * (1.0 + svls_core::seg_metrics::DISTANCE_RELATIVE_SLACK);
    let close = |from: &[usize], to: &[usize]| {
        from.iter()
            .filter(|&&a| to.iter().map(|&b| d2(a, b)).fold(f64::INFINITY, f64::min) <= limit)
            .count()
    };
    (close(&st, &sp) + close(&sp, &st)) as f64 / (st.len() + sp.len()) as f64
}

/// Mean over voxels of `-sum_c t_c ln softmax(z)_c`, class-major inputs.
pub fn mean_ce_from_logits(target: &[f64], logits: &[f64], voxels: usize, classes: usize) -> f64 {
    let mut total = 0.0;
    for v in 0..voxels {
        let z: Vec<f64> = (0..classes).map(|c| logits[c * voxels + v]).collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        for c in 0..classes {
            total -= target[c * voxels + v] * (z[c] - lse);
        }
    }
    total / voxels as f64
}

/// Central differences of the mean loss, scaled back to per-voxel gradients.
pub fn fd_gradient(target: &[f64], logits: &[f64], voxels: usize, classes: usize, step: f64) -> Vec<f64> {
    let mut z = logits.to_vec();
    (0..z.len())
        .map(|i| {
            let orig = z[i];
            z[i] = orig + step;
            let up = mean_ce_from_logits(target, &z, voxels, classes);
            z[i] = orig - step;
            let down = mean_ce_from_logits(target, &z, voxels, classes);
            z[i] = orig;
            (up - down) / (2.0 * step) * voxels as f64
        })
        .collect()
}

pub fn random_dims<R: Rng>(rng: &mut R, rank: usize, max: usize) -> Vec<usize> {
    (0..rank).map(|_| rng.gen_range(1..=max)).collect()
}

pub fn random_labels<R: Rng>(rng: &mut R, n: usize, classes: usize) -> Vec<u8> {
    (0..n).map(|_| rng.gen_range(0..classes) as u8).collect()
}

/// Random blob-like mask: a union of a few random boxes.
pub fn random_mask<R: Rng>(rng: &mut R, dims: &[usize]) -> Vec<bool> {
    let n: usize = dims.iter().product();
    let mut m = vec![false; n];
    for _ in 0..rng.gen_range(0..4) {
        let lo: Vec<usize> = dims.iter().map(|&d| rng.gen_range(0..d)).collect();
        let hi: Vec<usize> = lo.iter().zip(dims).map(|(&l, &d)| rng.gen_range(l + 1..=d)).collect();
        for (v, slot) in m.iter_mut().enumerate() {
            let c = unravel(v, dims);
            if (0..dims.len()).all(|a| c[a] >= lo[a] && c[a] < hi[a]) {
                *slot = true;
            }
        }
    }
    // sprinkle isolated voxels so boundaries are irregular
    for _ in 0..rng.gen_range(0..5) {
        m[rng.gen_range(0..n)] = true;
    }
    m
}

/// Random probability vectors, class-major, every entry strictly positive.
pub fn random_simplex<R: Rng>(rng: &mut R, voxels: usize, classes: usize) -> Vec<f64> {
    let mut out = vec![0.0; voxels * classes];
    for v in 0..voxels {
        let raw: Vec<f64> = (0..classes).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        for c in 0..classes {
            out[c * voxels + v] = raw[c] / s;
        }
    }
    out
}
