use serde::{Deserialize, Serialize};

use super::{deviation_report, PruneError, PruneReport};
use crate::linalg::DenseMatrix;

/// `O × C × K × K` kernel stored output-channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvKernel {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub values: Vec<f64>,
    pub stride: usize,
    pub padding: usize,
}

impl ConvKernel {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_size: usize,
        values: Vec<f64>,
        stride: usize,
        padding: usize,
    ) -> Result<Self, PruneError> {
        if kernel_size == 0 || stride == 0 || out_channels == 0 || in_channels == 0 {
            return Err(PruneError::InvalidArgument(
                "channels, kernel size and stride must be positive".into(),
            ));
        }
        let expect = out_channels * in_channels * kernel_size * kernel_size;
        if values.len() != expect {
            return Err(PruneError::InvalidArgument(format!(
                "kernel needs {expect} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PruneError::InvalidArgument("kernel has non-finite values".into()));
        }
        Ok(Self {
            out_channels,
            in_channels,
            kernel_size,
            values,
            stride,
            padding,
        })
    }

    /// Stride 1 with padding `⌊K/2⌋`.
    pub fn half_padded(
        out_channels: usize,
        in_channels: usize,
        kernel_size: usize,
        values: Vec<f64>,
    ) -> Result<Self, PruneError> {
        Self::new(out_channels, in_channels, kernel_size, values, 1, kernel_size / 2)
    }

    #[inline]
    pub fn at(&self, o: usize, c: usize, i: usize, j: usize) -> f64 {
        let k = self.kernel_size;
        self.values[((o * self.in_channels + c) * k + i) * k + j]
    }

    fn channel_len(&self) -> usize {
        self.in_channels * self.kernel_size * self.kernel_size
    }

    pub fn channel(&self, o: usize) -> &[f64] {
        let len = self.channel_len();
        &self.values[o * len..(o + 1) * len]
    }

    /// Output spatial size for an `h × w` input.
    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize), PruneError> {
        let k = self.kernel_size;
        let (ph, pw) = (h + 2 * self.padding, w + 2 * self.padding);
        if ph < k || pw < k {
            return Err(PruneError::InvalidArgument(format!(
                "kernel {k}x{k} does not fit padded input {ph}x{pw}"
            )));
        }
        Ok(((ph - k) / self.stride + 1, (pw - k) / self.stride + 1))
    }
}

/// `C × H × W` signal stored channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl Signal {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self, PruneError> {
        if values.len() != channels * height * width {
            return Err(PruneError::InvalidArgument(format!(
                "signal {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                values.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    #[inline]
    pub fn at(&self, c: usize, i: usize, j: usize) -> f64 {
        self.values[(c * self.height + i) * self.width + j]
    }
}

/// `A ∈ ℝ^{CKK × O}`; row `(c·K + i)·K + j` holds tap `(c, i, j)` of every
/// output channel.
pub fn conv_to_matrix(k: &ConvKernel) -> DenseMatrix {
    let len = k.channel_len();
    DenseMatrix::from_fn(len, k.out_channels, |r, o| k.values[o * len + r])
}

/// `Z ∈ ℝ^{CKK × H'W'}`: column `y·W' + x` is the receptive field of output
/// position `(y, x)`, unfolded channel-major, then row, then column. Padding
/// reads as zero.
pub fn signal_rearrange(input: &Signal, k: &ConvKernel) -> Result<DenseMatrix, PruneError> {
    if input.channels != k.in_channels {
        return Err(PruneError::InvalidArgument(format!(
            "input has {} channels, kernel expects {}",
            input.channels, k.in_channels
        )));
    }
    let (oh, ow) = k.output_size(input.height, input.width)?;
    let ks = k.kernel_size;
    let pad = k.padding as isize;
    let mut z = DenseMatrix::zeros(k.channel_len(), oh * ow);
    for c in 0..input.channels {
        for i in 0..ks {
            for j in 0..ks {
                let r = (c * ks + i) * ks + j;
                let row = z.row_mut(r);
                for y in 0..oh {
                    let src_y = (y * k.stride + i) as isize - pad;
                    if src_y < 0 || src_y >= input.height as isize {
                        continue;
                    }
                    for x in 0..ow {
                        let src_x = (x * k.stride + j) as isize - pad;
                        if src_x < 0 || src_x >= input.width as isize {
                            continue;
                        }
                        row[y * ow + x] = input.at(c, src_y as usize, src_x as usize);
                    }
                }
            }
        }
    }
    Ok(z)
}

/// Cross-correlation computed as `ZᵀA`, returned as an `O × H' × W'` signal.
pub fn conv2d_via_matmul(k: &ConvKernel, input: &Signal) -> Result<Signal, PruneError> {
    let z = signal_rearrange(input, k)?;
    let (oh, ow) = k.output_size(input.height, input.width)?;
    let prod = z.t_matmul(&conv_to_matrix(k))?;
    let mut values = vec![0.0; k.out_channels * oh * ow];
    for p in 0..oh * ow {
        for o in 0..k.out_channels {
            values[o * oh * ow + p] = prod[(p, o)];
        }
    }
    Signal::new(k.out_channels, oh, ow, values)
}

/// Zeros the `⌊O·drop_fraction⌋` output channels with the smallest L1 mass
/// (ties by lower channel index). Deviations are measured on the unfolded
/// `CKK × O` matrix.
pub fn channel_prune_l1(k: &ConvKernel, drop_fraction: f64) -> Result<(ConvKernel, Vec<usize>, PruneReport), PruneError> {
    if !(0.0..1.0).contains(&drop_fraction) {
        return Err(PruneError::InvalidArgument(format!(
            "drop fraction must lie in [0, 1), got {drop_fraction}"
        )));
    }
    let o = k.out_channels;
    let drop = (o as f64 * drop_fraction + 1e-9).floor() as usize;
    let mass: Vec<f64> = (0..o).map(|c| k.channel(c).iter().map(|v| v.abs()).sum()).collect();
    let mut order: Vec<usize> = (0..o).collect();
    order.sort_by(|&a, &b| mass[a].total_cmp(&mass[b]).then(a.cmp(&b)));
    let mut dropped: Vec<usize> = order[..drop].to_vec();
    dropped.sort_unstable();

    let mut pruned = k.clone();
    let len = k.channel_len();
    for &c in &dropped {
        pruned.values[c * len..(c + 1) * len].iter_mut().for_each(|v| *v = 0.0);
    }
    let a = conv_to_matrix(k);
    let a_pruned = conv_to_matrix(&pruned);
    let report = deviation_report(&a, &a_pruned, o - drop)?;
    Ok((pruned, dropped, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_kernel_scales() {
        let k = ConvKernel::half_padded(1, 1, 1, vec![2.5]).unwrap();
        assert_eq!(conv_to_matrix(&k).shape(), (1, 1));
        let s = Signal::new(1, 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let out = conv2d_via_matmul(&k, &s).unwrap();
        assert_eq!(out.values, vec![2.5, 5.0, 7.5, 10.0, 12.5, 15.0]);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut v = vec![0.0; 9];
        v[4] = 1.0;
        let k = ConvKernel::half_padded(1, 1, 3, v).unwrap();
        let s = Signal::new(1, 4, 4, (0..16).map(|x| x as f64).collect()).unwrap();
        assert_eq!(conv2d_via_matmul(&k, &s).unwrap(), s);
    }

    #[test]
    fn zero_channel_dropped_first() {
        let mut v = vec![1.0; 2 * 1 * 2 * 2];
        v[4..8].iter_mut().for_each(|x| *x = 0.0);
        let k = ConvKernel::half_padded(2, 1, 2, v).unwrap();
        let (p, dropped, rep) = channel_prune_l1(&k, 0.5).unwrap();
        assert_eq!(dropped, vec![1]);
        assert_eq!(p, k);
        assert_eq!(rep.fro_norm_dev, 0.0);
        let (same, none, _) = channel_prune_l1(&k, 0.0).unwrap();
        assert!(none.is_empty());
        assert_eq!(same, k);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let k = ConvKernel::half_padded(1, 2, 1, vec![1.0, 1.0]).unwrap();
        let s = Signal::new(1, 2, 2, vec![0.0; 4]).unwrap();
        assert!(signal_rearrange(&s, &k).is_err());
    }
}
