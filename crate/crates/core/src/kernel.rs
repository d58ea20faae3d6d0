//! The 3-per-axis smoothing stencil.
//!
//! Raw weights come from an isotropic Gaussian sampled at integer offsets in
//! voxel units. The Gaussian's normalization constant is dropped: every tap
//! is later divided by the sum of the off-center taps, so the constant
//! cancels. The center tap is then set to that same sum, which after the
//! division makes the center exactly 1 and the total weight exactly 2.

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_SIGMA: f64 = 1.0;

fn check_rank(rank: usize) -> Result<()> {
    if !(2..=3).contains(&rank) {
        return Err(Error::param("rank", format!("must be 2 or 3, got {rank}")));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
    }
    Ok(())
}

pub(crate) fn tap_count(rank: usize) -> usize {
    3usize.pow(rank as u32)
}

/// Offset of tap `i` in row-major order over `{-1, 0, 1}^rank`.
pub fn tap_offset(rank: usize, mut i: usize) -> Vec<isize> {
    let mut offset = vec![0isize; rank];
    for o in offset.iter_mut().rev() {
        *o = (i % 3) as isize - 1;
        i /= 3;
    }
    offset
}

fn tap_index(offset: &[isize]) -> usize {
    offset.iter().fold(0, |acc, &o| acc * 3 + (o + 1) as usize)
}

/// Unnormalized Gaussian weights `exp(-|o|^2 / 2 sigma^2)` over the 3^rank stencil.
pub fn gaussian_taps(rank: usize, sigma: f64) -> Result<Vec<f64>> {
    check_rank(rank)?;
    check_sigma(sigma)?;
    let two_var = 2.0 * sigma * sigma;
    Ok((0..tap_count(rank))
        .map(|i| {
            let sq: isize = tap_offset(rank, i).iter().map(|o| o * o).sum();
            (-(sq as f64) / two_var).exp()
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SvlsKernel {
    rank: usize,
    sigma: f64,
    taps: Vec<f64>,
    total_weight: f64,
}

/// Gaussian stencil re-weighted so that the center equals the sum of its neighbors.
pub fn svls_weights(rank: usize, sigma: f64) -> Result<SvlsKernel> {
    let raw = gaussian_taps(rank, sigma)?;
    SvlsKernel::from_raw_taps(rank, sigma, &raw)
}

impl SvlsKernel {
    /// Builds the kernel from any positive raw stencil (center tap ignored).
    pub fn from_raw_taps(rank: usize, sigma: f64, raw: &[f64]) -> Result<Self> {
        check_rank(rank)?;
        check_sigma(sigma)?;
        let center = tap_count(rank) / 2;
        if raw.len() != tap_count(rank) {
            return Err(Error::param(
                "taps",
                format!("expected {} taps, got {}", tap_count(rank), raw.len()),
            ));
        }
        if raw
            .iter()
            .enumerate()
            .any(|(i, &w)| i != center && !(w.is_finite() && w > 0.0))
        {
            return Err(Error::param("taps", "off-center taps must be positive"));
        }
        let surround: f64 = raw
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != center)
            .map(|(_, w)| w)
            .sum();
        let taps: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(i, &w)| if i == center { 1.0 } else { w / surround })
            .collect();
        let total_weight = 1.0 + taps.iter().enumerate().filter(|&(i, _)| i != center).map(|(_, w)| w).sum::<f64>();
        Ok(Self {
            rank,
            sigma,
            taps,
            total_weight,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Row-major over `{-1, 0, 1}^rank`; see [`tap_offset`].
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn center(&self) -> f64 {
        self.taps[self.taps.len() / 2]
    }

    pub fn tap(&self, offset: &[isize]) -> f64 {
        assert_eq!(offset.len(), self.rank);
        assert!(offset.iter().all(|o| (-1..=1).contains(o)));
        self.taps[tap_index(offset)]
    }

    /// `(offset, weight)` for every tap.
    pub fn offsets(&self) -> impl Iterator<Item = (Vec<isize>, f64)> + '_ {
        self.taps
            .iter()
            .enumerate()
            .map(|(i, &w)| (tap_offset(self.rank, i), w))
    }

    /// Human-readable slices, one 3x3 block per leading offset.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "rank {} sigma {} total_weight {:.6}\n",
            self.rank, self.sigma, self.total_weight
        );
        for (block, chunk) in self.taps.chunks(9).enumerate() {
            if self.rank == 3 {
                out.push_str(&format!("z = {}\n", block as isize - 1));
            }
            for row in chunk.chunks(3) {
                let cells: Vec<String> = row.iter().map(|w| format!("{w:.6}")).collect();
                out.push_str(&cells.join(" "));
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn by_distance(kernel: &SvlsKernel, sq: isize) -> f64 {
        kernel
            .offsets()
            .find(|(o, _)| o.iter().map(|x| x * x).sum::<isize>() == sq)
            .unwrap()
            .1
    }

    #[test]
    fn raw_taps_rank2() {
        let raw = gaussian_taps(2, 1.0).unwrap();
        assert_eq!(raw[4], 1.0);
        assert!((raw[1] - 0.606531).abs() < 1e-6);
        assert!((raw[0] - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn raw_taps_rank3() {
        let raw = gaussian_taps(3, 1.0).unwrap();
        assert_eq!(raw[13], 1.0);
        assert!((raw[tap_index(&[0, 0, 1])] - 0.606531).abs() < 1e-6);
        assert!((raw[tap_index(&[0, 1, 1])] - 0.367879).abs() < 1e-6);
        assert!((raw[tap_index(&[1, 1, 1])] - 0.223130).abs() < 1e-6);
    }

    #[test]
    fn raw_taps_flatten_for_huge_sigma() {
        let raw = gaussian_taps(2, 1e6).unwrap();
        assert!(raw.iter().all(|w| (w - 1.0).abs() < 1e-6));
    }

    #[test]
    fn rejects_bad_rank_and_sigma() {
        assert!(gaussian_taps(1, 1.0).is_err());
        assert!(gaussian_taps(4, 1.0).is_err());
        assert!(svls_weights(2, 0.0).is_err());
        assert!(svls_weights(3, -1.0).is_err());
        assert!(svls_weights(3, f64::NAN).is_err());
    }

    #[test]
    fn weights_rank2_sigma1() {
        let k = svls_weights(2, 1.0).unwrap();
        assert_eq!(k.center(), 1.0);
        assert!((by_distance(&k, 1) - 0.155615).abs() < 1e-6);
        assert!((by_distance(&k, 2) - 0.094385).abs() < 1e-6);
        assert!((k.total_weight() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn weights_rank3_sigma1() {
        let k = svls_weights(3, 1.0).unwrap();
        assert_eq!(k.center(), 1.0);
        assert!((by_distance(&k, 1) - 0.061647).abs() < 1e-6);
        assert!((by_distance(&k, 2) - 0.037391).abs() < 1e-6);
        assert!((by_distance(&k, 3) - 0.022679).abs() < 1e-6);
        assert!((k.total_weight() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn center_is_half_of_total() {
        for rank in [2, 3] {
            for sigma in [0.3, 1.0, 4.0] {
                let k = svls_weights(rank, sigma).unwrap();
                assert!((k.center() / k.total_weight() - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn taps_decrease_with_distance() {
        let k = svls_weights(3, 1.0).unwrap();
        let d: Vec<f64> = (1..=3).map(|sq| by_distance(&k, sq)).collect();
        assert!(d[0] > d[1] && d[1] > d[2]);
    }

    #[test]
    fn text_dump_has_every_tap() {
        let k = svls_weights(3, 1.0).unwrap();
        let text = k.to_text();
        assert_eq!(text.lines().filter(|l| l.split(' ').count() == 3 && !l.starts_with('z')).count(), 9);
        assert!(text.contains("1.000000"));
    }
}
