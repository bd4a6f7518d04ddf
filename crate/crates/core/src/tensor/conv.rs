use super::Tensor;
use crate::error::{Error, Result};

/// 2-D cross-correlation of a `C×H×W` map with an `O×C×kh×kw` kernel,
/// zero padding on all four sides.
pub fn conv2d(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (c, h, w) = x.chw()?;
    let (o, kc, kh, kw) = match *kernel.dims() {
        [o, kc, kh, kw] => (o, kc, kh, kw),
        _ => {
            return Err(Error::shape(format!(
                "kernel must be O×C×kh×kw, got {:?}",
                kernel.dims()
            )))
        }
    };
    if kc != c {
        return Err(Error::shape(format!(
            "kernel expects {kc} channels, input has {c}"
        )));
    }
    if bias.dims() != [o] {
        return Err(Error::shape(format!(
            "bias must be [{o}], got {:?}",
            bias.dims()
        )));
    }
    if stride == 0 {
        return Err(Error::shape("stride must be at least 1"));
    }
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    if kh > ph || kw > pw {
        return Err(Error::shape(format!(
            "kernel {kh}×{kw} larger than padded input {ph}×{pw}"
        )));
    }
    let oh = (ph - kh) / stride + 1;
    let ow = (pw - kw) / stride + 1;

    let xd = x.data();
    let kd = kernel.data();
    let mut out = vec![0.0f32; o * oh * ow];
    let mut plane = vec![0.0f64; oh * ow];
    for (oc, dst) in out.chunks_exact_mut(oh * ow).enumerate() {
        plane.fill(bias.data()[oc] as f64);
        for ic in 0..c {
            let src = &xd[ic * h * w..(ic + 1) * h * w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = kd[((oc * c + ic) * kh + ky) * kw + kx] as f64;
                    if wv == 0.0 {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let srow = &src[iy as usize * w..(iy as usize + 1) * w];
                        let drow = &mut plane[oy * ow..(oy + 1) * ow];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix >= 0 && ix < w as isize {
                                *d += wv * srow[ix as usize] as f64;
                            }
                        }
                    }
                }
            }
        }
        for (d, &v) in dst.iter_mut().zip(&plane) {
            *d = v as f32;
        }
    }
    Tensor::new(&[o, oh, ow], out)
}

/// Nearest-neighbour ×2 upsampling: every pixel becomes a 2×2 block.
pub fn upsample_x2(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.chw()?;
    let (oh, ow) = (2 * h, 2 * w);
    let src = x.data();
    let mut out = vec![0.0f32; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for xo in 0..ow {
                out[(ch * oh + y) * ow + xo] = src[(ch * h + y / 2) * w + xo / 2];
            }
        }
    }
    Tensor::new(&[c, oh, ow], out)
}

/// Non-overlapping average pooling with a `factor×factor` window.
pub fn avg_pool2d(x: &Tensor, factor: usize) -> Result<Tensor> {
    let (c, h, w) = x.chw()?;
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::shape(format!(
            "cannot pool {h}×{w} by a factor of {factor}"
        )));
    }
    let (oh, ow) = (h / factor, w / factor);
    let norm = 1.0 / (factor * factor) as f32;
    let src = x.data();
    let mut out = vec![0.0f32; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for xo in 0..ow {
                let mut acc = 0.0f32;
                for dy in 0..factor {
                    for dx in 0..factor {
                        acc += src[(ch * h + y * factor + dy) * w + xo * factor + dx];
                    }
                }
                out[(ch * oh + y) * ow + xo] = acc * norm;
            }
        }
    }
    Tensor::new(&[c, oh, ow], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::oracle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(dims, |_| rng.gen_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn identity_kernel_passes_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random(&[3, 5, 6], &mut rng);
        let k = Tensor::from_fn(&[3, 3, 1, 1], |i| if i % 4 == 0 { 1.0 } else { 0.0 }).unwrap();
        let b = Tensor::zeros(&[3]).unwrap();
        assert_eq!(conv2d(&x, &k, &b, 1, 0).unwrap(), x);
    }

    #[test]
    fn zero_kernel_gives_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&[2, 4, 4], &mut rng);
        let k = Tensor::zeros(&[2, 2, 3, 3]).unwrap();
        let b = Tensor::new(&[2], vec![0.25, -1.5]).unwrap();
        let y = conv2d(&x, &k, &b, 1, 1).unwrap();
        assert_eq!(y.dims(), &[2, 4, 4]);
        assert!(y.data()[..16].iter().all(|&v| v == 0.25));
        assert!(y.data()[16..].iter().all(|&v| v == -1.5));
    }

    #[test]
    fn strided_padded_matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random(&[2, 4, 4], &mut rng);
        let k = random(&[1, 2, 3, 3], &mut rng);
        let b = random(&[1], &mut rng);
        let got = conv2d(&x, &k, &b, 2, 1).unwrap();
        let want = oracle::conv2d(&x, &k, &b, 2, 1);
        assert_eq!(got.dims(), &[1, 2, 2]);
        for (g, w) in got.data().iter().zip(&want) {
            assert!((*g as f64 - w).abs() <= 1e-6);
        }
    }

    #[test]
    fn conv_shape_errors() {
        let x = Tensor::zeros(&[2, 4, 4]).unwrap();
        let b = Tensor::zeros(&[1]).unwrap();
        assert!(conv2d(&x, &Tensor::zeros(&[1, 3, 3, 3]).unwrap(), &b, 1, 1).is_err());
        assert!(conv2d(&x, &Tensor::zeros(&[1, 2, 7, 7]).unwrap(), &b, 1, 1).is_err());
        assert!(conv2d(&x, &Tensor::zeros(&[1, 2, 3, 3]).unwrap(), &b, 0, 1).is_err());
        assert!(conv2d(
            &x,
            &Tensor::zeros(&[1, 2, 3, 3]).unwrap(),
            &Tensor::zeros(&[2]).unwrap(),
            1,
            1
        )
        .is_err());
    }

    #[test]
    fn upsample_replicates() {
        let one = Tensor::new(&[1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(upsample_x2(&one).unwrap().data(), &[1.0; 4]);

        let x = Tensor::new(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = upsample_x2(&x).unwrap();
        assert_eq!(y.dims(), &[1, 4, 4]);
        assert_eq!(
            y.data(),
            &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 3.0, 3.0, 4.0, 4.0]
        );

        let c = Tensor::full(&[2, 3, 5], 0.7).unwrap();
        let u = upsample_x2(&c).unwrap();
        assert_eq!(u.dims(), &[2, 6, 10]);
        assert!(u.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn avg_pool_means_blocks() {
        let x = Tensor::new(&[1, 2, 4], vec![1.0, 3.0, 0.0, 0.0, 5.0, 7.0, 2.0, 2.0]).unwrap();
        let y = avg_pool2d(&x, 2).unwrap();
        assert_eq!(y.dims(), &[1, 1, 2]);
        assert_eq!(y.data(), &[4.0, 1.0]);
        assert!(avg_pool2d(&x, 3).is_err());
    }
}
