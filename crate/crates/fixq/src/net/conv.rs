//! Dense f64 convolution kernels for the toy autoencoder.
//!
//! The transposed convolution is the exact adjoint of the strided
//! convolution, so the two share index arithmetic: conv gathers over
//! `in = stride*out + k - pad`, tconv scatters along the same map.

use crate::tensor::WeightTensor;

/// A C x H x W activation volume, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn new(c: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), c * h * w);
        Self { c, h, w, data }
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f64 {
        &mut self.data[(c * self.h + y) * self.w + x]
    }
}

/// Strided convolution. Weight layout `[out][in][kh][kw]`.
pub fn conv_forward(
    x: &Tensor3,
    weight: &WeightTensor,
    bias: &[f64],
    stride: usize,
    pad: usize,
) -> Tensor3 {
    let (kh, kw) = (weight.kernel_h(), weight.kernel_w());
    let oh = (x.h + 2 * pad - kh) / stride + 1;
    let ow = (x.w + 2 * pad - kw) / stride + 1;
    let mut y = Tensor3::zeros(weight.out_channels(), oh, ow);
    for o in 0..weight.out_channels() {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias[o];
                for i in 0..weight.in_channels() {
                    for ky in 0..kh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= x.h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= x.w as isize {
                                continue;
                            }
                            acc += weight.values()[weight.index(o, i, ky, kx)]
                                * x.at(i, iy as usize, ix as usize);
                        }
                    }
                }
                *y.at_mut(o, oy, ox) = acc;
            }
        }
    }
    y
}

/// Gradients of [`conv_forward`] with respect to input, weight, and bias.
pub fn conv_backward(
    x: &Tensor3,
    weight: &WeightTensor,
    stride: usize,
    pad: usize,
    gy: &Tensor3,
) -> (Tensor3, Vec<f64>, Vec<f64>) {
    let (kh, kw) = (weight.kernel_h(), weight.kernel_w());
    let mut gx = Tensor3::zeros(x.c, x.h, x.w);
    let mut gw = vec![0.0; weight.len()];
    let mut gb = vec![0.0; weight.out_channels()];
    for o in 0..weight.out_channels() {
        for oy in 0..gy.h {
            for ox in 0..gy.w {
                let g = gy.at(o, oy, ox);
                gb[o] += g;
                for i in 0..weight.in_channels() {
                    for ky in 0..kh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= x.h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= x.w as isize {
                                continue;
                            }
                            let wi = weight.index(o, i, ky, kx);
                            gw[wi] += g * x.at(i, iy as usize, ix as usize);
                            *gx.at_mut(i, iy as usize, ix as usize) += g * weight.values()[wi];
                        }
                    }
                }
            }
        }
    }
    (gx, gw, gb)
}

/// Transposed (adjoint) convolution: maps `h` to `stride * h`.
/// Weight layout `[out][in][kh][kw]` where `in` indexes the small side.
pub fn tconv_forward(
    x: &Tensor3,
    weight: &WeightTensor,
    bias: &[f64],
    stride: usize,
    pad: usize,
) -> Tensor3 {
    let (kh, kw) = (weight.kernel_h(), weight.kernel_w());
    let (oh, ow) = (x.h * stride, x.w * stride);
    let mut y = Tensor3::zeros(weight.out_channels(), oh, ow);
    for o in 0..weight.out_channels() {
        for yy in 0..oh {
            for xx in 0..ow {
                *y.at_mut(o, yy, xx) = bias[o];
            }
        }
        for i in 0..weight.in_channels() {
            for py in 0..x.h {
                for px in 0..x.w {
                    let v = x.at(i, py, px);
                    for ky in 0..kh {
                        let qy = (py * stride + ky) as isize - pad as isize;
                        if qy < 0 || qy >= oh as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let qx = (px * stride + kx) as isize - pad as isize;
                            if qx < 0 || qx >= ow as isize {
                                continue;
                            }
                            *y.at_mut(o, qy as usize, qx as usize) +=
                                weight.values()[weight.index(o, i, ky, kx)] * v;
                        }
                    }
                }
            }
        }
    }
    y
}

/// Gradients of [`tconv_forward`].
pub fn tconv_backward(
    x: &Tensor3,
    weight: &WeightTensor,
    stride: usize,
    pad: usize,
    gy: &Tensor3,
) -> (Tensor3, Vec<f64>, Vec<f64>) {
    let (kh, kw) = (weight.kernel_h(), weight.kernel_w());
    let mut gx = Tensor3::zeros(x.c, x.h, x.w);
    let mut gw = vec![0.0; weight.len()];
    let mut gb = vec![0.0; weight.out_channels()];
    for o in 0..weight.out_channels() {
        for qy in 0..gy.h {
            for qx in 0..gy.w {
                gb[o] += gy.at(o, qy, qx);
            }
        }
        for i in 0..weight.in_channels() {
            for py in 0..x.h {
                for px in 0..x.w {
                    let xv = x.at(i, py, px);
                    let mut acc = 0.0;
                    for ky in 0..kh {
                        let qy = (py * stride + ky) as isize - pad as isize;
                        if qy < 0 || qy >= gy.h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let qx = (px * stride + kx) as isize - pad as isize;
                            if qx < 0 || qx >= gy.w as isize {
                                continue;
                            }
                            let g = gy.at(o, qy as usize, qx as usize);
                            let wi = weight.index(o, i, ky, kx);
                            gw[wi] += g * xv;
                            acc += g * weight.values()[wi];
                        }
                    }
                    *gx.at_mut(i, py, px) += acc;
                }
            }
        }
    }
    (gx, gw, gb)
}

/// Rectifier and its mask. `leaky_relu` is kept for the hyper-path
/// activation even though the default toy topology does not use it.
pub fn relu(x: &Tensor3) -> Tensor3 {
    Tensor3 {
        c: x.c,
        h: x.h,
        w: x.w,
        data: x.data.iter().map(|&v| v.max(0.0)).collect(),
    }
}

pub fn relu_backward(pre: &Tensor3, gy: &Tensor3) -> Tensor3 {
    Tensor3 {
        c: gy.c,
        h: gy.h,
        w: gy.w,
        data: pre
            .data
            .iter()
            .zip(&gy.data)
            .map(|(&p, &g)| if p > 0.0 { g } else { 0.0 })
            .collect(),
    }
}

pub fn leaky_relu(x: &Tensor3, slope: f64) -> Tensor3 {
    Tensor3 {
        c: x.c,
        h: x.h,
        w: x.w,
        data: x
            .data
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect(),
    }
}

pub fn leaky_relu_backward(pre: &Tensor3, gy: &Tensor3, slope: f64) -> Tensor3 {
    Tensor3 {
        c: gy.c,
        h: gy.h,
        w: gy.w,
        data: pre
            .data
            .iter()
            .zip(&gy.data)
            .map(|(&p, &g)| if p > 0.0 { g } else { slope * g })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor3(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor3 {
        Tensor3::new(c, h, w, (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    fn rand_weight(rng: &mut ChaCha8Rng, o: usize, i: usize, k: usize) -> WeightTensor {
        WeightTensor::new(
            o,
            i,
            k,
            k,
            (0..o * i * k * k).map(|_| rng.gen_range(-0.3..0.3)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn conv_shapes_halve_and_tconv_doubles() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = rand_tensor3(&mut rng, 3, 16, 16);
        let w = rand_weight(&mut rng, 8, 3, 5);
        let y = conv_forward(&x, &w, &[0.0; 8], 2, 2);
        assert_eq!((y.c, y.h, y.w), (8, 8, 8));
        let wt = rand_weight(&mut rng, 3, 8, 5);
        let z = tconv_forward(&y, &wt, &[0.0; 3], 2, 2);
        assert_eq!((z.c, z.h, z.w), (3, 16, 16));
    }

    #[test]
    fn conv_is_linear_in_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_tensor3(&mut rng, 2, 8, 8);
        let doubled = Tensor3::new(2, 8, 8, x.data.iter().map(|v| 2.0 * v).collect());
        let w = rand_weight(&mut rng, 3, 2, 5);
        let y1 = conv_forward(&x, &w, &[0.0; 3], 2, 2);
        let y2 = conv_forward(&doubled, &w, &[0.0; 3], 2, 2);
        for (a, b) in y1.data.iter().zip(&y2.data) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tconv_is_adjoint_of_conv_gradient() {
        // <conv_gx(gy), x> == <gy, conv(x)> for zero bias: the input
        // gradient of conv must be the adjoint map.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_tensor3(&mut rng, 2, 8, 8);
        let w = rand_weight(&mut rng, 3, 2, 5);
        let y = conv_forward(&x, &w, &[0.0; 3], 2, 2);
        let gy = rand_tensor3(&mut rng, 3, 4, 4);
        let (gx, _, _) = conv_backward(&x, &w, 2, 2, &gy);
        let lhs: f64 = gy.data.iter().zip(&y.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = gx.data.iter().zip(&x.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let x = Tensor3::zeros(3, 8, 8);
        let w = WeightTensor::zeros(4, 3, 5, 5);
        let y = conv_forward(&x, &w, &[0.0; 4], 2, 2);
        assert!(y.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn leaky_relu_slope() {
        let x = Tensor3::new(1, 1, 2, vec![-2.0, 3.0]);
        let y = leaky_relu(&x, 0.01);
        assert_eq!(y.data, vec![-0.02, 3.0]);
        let g = leaky_relu_backward(&x, &Tensor3::new(1, 1, 2, vec![1.0, 1.0]), 0.01);
        assert_eq!(g.data, vec![0.01, 1.0]);
    }
}
