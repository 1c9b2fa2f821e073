use super::{Scalar, Tensor};

/// A same-padded convolution with square `kernel` (1 or 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
}

impl ConvShape {
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.kernel * self.kernel
    }

    fn patch_len(&self) -> usize {
        self.cin * self.kernel * self.kernel
    }
}

/// Unfolds a `c × h × w` input into `(c·9) × (h·w)` columns for a 3×3
/// kernel with one cell of zero padding. Row `ci·9 + ky·3 + kx` holds the
/// input shifted by `(ky - 1, kx - 1)`.
pub fn im2col3<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, cols: &mut [T]) {
    let hw = h * w;
    debug_assert_eq!(cols.len(), c * 9 * hw);
    for ci in 0..c {
        let src = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let dst = &mut cols[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let row = &mut dst[y * w..(y + 1) * w];
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        row.fill(T::zero());
                        continue;
                    }
                    let s = &src[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            row[0] = T::zero();
                            row[1..].copy_from_slice(&s[..w - 1]);
                        }
                        1 => row.copy_from_slice(s),
                        _ => {
                            row[..w - 1].copy_from_slice(&s[1..]);
                            row[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col3`]: folds columns back, accumulating into `dx`.
pub fn col2im3<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, dx: &mut [T]) {
    let hw = h * w;
    for ci in 0..c {
        let dst = &mut dx[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let src = &cols[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let row = &src[y * w..(y + 1) * w];
                    let d = &mut dst[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => d[..w - 1].iter_mut().zip(&row[1..]).for_each(|(a, &b)| *a += b),
                        1 => d.iter_mut().zip(row).for_each(|(a, &b)| *a += b),
                        _ => d[1..].iter_mut().zip(&row[..w - 1]).for_each(|(a, &b)| *a += b),
                    }
                }
            }
        }
    }
}

/// `y = W * x + b`, optionally followed by ReLU.
pub fn conv_forward<T: Scalar>(x: &Tensor<T>, weight: &[T], bias: &[T], shape: ConvShape, relu: bool) -> Tensor<T> {
    assert_eq!(x.c, shape.cin, "conv input channels");
    assert_eq!(weight.len(), shape.weight_len());
    assert_eq!(bias.len(), shape.cout);
    let hw = x.plane_len();
    let mut out = Tensor::zeros(shape.cout, x.h, x.w);
    if shape.kernel == 1 {
        T::gemm(shape.cout, shape.cin, hw, T::one(), weight, false, &x.data, false, T::zero(), &mut out.data);
    } else {
        let mut cols = vec![T::zero(); shape.patch_len() * hw];
        im2col3(&x.data, x.c, x.h, x.w, &mut cols);
        T::gemm(shape.cout, shape.patch_len(), hw, T::one(), weight, false, &cols, false, T::zero(), &mut out.data);
    }
    for (plane, &b) in out.data.chunks_mut(hw).zip(bias) {
        if relu {
            plane.iter_mut().for_each(|v| *v = (*v + b).max(T::zero()));
        } else {
            plane.iter_mut().for_each(|v| *v += b);
        }
    }
    out
}

/// Backward pass of [`conv_forward`]. `y` is the forward output (used for
/// the ReLU mask). Weight and bias gradients accumulate into `dw` and `db`.
/// Returns the input gradient when `need_dx` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Scalar>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    mut dy: Tensor<T>,
    weight: &[T],
    shape: ConvShape,
    relu: bool,
    dw: &mut [T],
    db: &mut [T],
    need_dx: bool,
) -> Option<Tensor<T>> {
    let hw = x.plane_len();
    if relu {
        dy.data
            .iter_mut()
            .zip(&y.data)
            .for_each(|(g, &o)| {
                if o <= T::zero() {
                    *g = T::zero()
                }
            });
    }
    for (plane, b) in dy.data.chunks(hw).zip(db.iter_mut()) {
        *b += plane.iter().copied().sum::<T>();
    }
    if shape.kernel == 1 {
        T::gemm(shape.cout, hw, shape.cin, T::one(), &dy.data, false, &x.data, true, T::one(), dw);
        return need_dx.then(|| {
            let mut dx = Tensor::zeros(shape.cin, x.h, x.w);
            T::gemm(shape.cin, shape.cout, hw, T::one(), weight, true, &dy.data, false, T::zero(), &mut dx.data);
            dx
        });
    }
    let k = shape.patch_len();
    let mut cols = vec![T::zero(); k * hw];
    im2col3(&x.data, x.c, x.h, x.w, &mut cols);
    T::gemm(shape.cout, hw, k, T::one(), &dy.data, false, &cols, true, T::one(), dw);
    need_dx.then(|| {
        T::gemm(k, shape.cout, hw, T::one(), weight, true, &dy.data, false, T::zero(), &mut cols);
        let mut dx = Tensor::zeros(shape.cin, x.h, x.w);
        col2im3(&cols, x.c, x.h, x.w, &mut dx.data);
        dx
    })
}

/// Flat index of the winning input cell for each pooled output cell.
pub type PoolIndex = Vec<u32>;

/// 2×2 max pooling with stride 2; ties go to the first cell in row-major
/// order.
pub fn maxpool2_forward<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, PoolIndex) {
    assert!(x.h.is_multiple_of(2) && x.w.is_multiple_of(2), "pooling needs even spatial size");
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut out = Tensor::zeros(x.c, oh, ow);
    let mut idx = Vec::with_capacity(x.c * oh * ow);
    for c in 0..x.c {
        let plane = x.plane(c);
        let base = c * x.plane_len();
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = oy * 2 * x.w + ox * 2;
                for cand in [best + 1, best + x.w, best + x.w + 1] {
                    if plane[cand] > plane[best] {
                        best = cand;
                    }
                }
                out.data[c * oh * ow + oy * ow + ox] = plane[best];
                idx.push((base + best) as u32);
            }
        }
    }
    (out, idx)
}

pub fn maxpool2_backward<T: Scalar>(dy: &Tensor<T>, idx: &PoolIndex, dx: &mut Tensor<T>) {
    for (&g, &i) in dy.data.iter().zip(idx) {
        dx.data[i as usize] += g;
    }
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample2_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (oh, ow) = (x.h * 2, x.w * 2);
    let mut out = Tensor::zeros(x.c, oh, ow);
    for c in 0..x.c {
        let src = x.plane(c);
        let dst = &mut out.data[c * oh * ow..(c + 1) * oh * ow];
        for y in 0..oh {
            let srow = &src[(y / 2) * x.w..(y / 2 + 1) * x.w];
            for (xo, d) in dst[y * ow..(y + 1) * ow].iter_mut().enumerate() {
                *d = srow[xo / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward<T: Scalar>(dy: &Tensor<T>) -> Tensor<T> {
    let (h, w) = (dy.h / 2, dy.w / 2);
    let mut dx = Tensor::zeros(dy.c, h, w);
    for c in 0..dy.c {
        let src = dy.plane(c);
        let dst = &mut dx.data[c * h * w..(c + 1) * h * w];
        for y in 0..dy.h {
            for x in 0..dy.w {
                dst[(y / 2) * w + x / 2] += src[y * dy.w + x];
            }
        }
    }
    dx
}

pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    assert_eq!((a.h, a.w), (b.h, b.w), "concat spatial size");
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Tensor::from_vec(a.c + b.c, a.h, a.w, data)
}

/// Splits off the first `first` channels.
pub fn split_channels<T: Scalar>(t: Tensor<T>, first: usize) -> (Tensor<T>, Tensor<T>) {
    let n = first * t.plane_len();
    let mut data = t.data;
    let rest = data.split_off(n);
    (
        Tensor::from_vec(first, t.h, t.w, data),
        Tensor::from_vec(t.c - first, t.h, t.w, rest),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(c: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_vec(c, h, w, (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    /// Direct 3x3 zero-padded convolution.
    fn naive_conv(x: &Tensor<f64>, w: &[f64], b: &[f64], cout: usize, k: usize) -> Tensor<f64> {
        let mut out = Tensor::zeros(cout, x.h, x.w);
        let r = (k / 2) as isize;
        for o in 0..cout {
            for y in 0..x.h {
                for xx in 0..x.w {
                    let mut acc = b[o];
                    for ci in 0..x.c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = y as isize + ky as isize - r;
                                let sx = xx as isize + kx as isize - r;
                                if sy >= 0 && sy < x.h as isize && sx >= 0 && sx < x.w as isize {
                                    acc += w[((o * x.c + ci) * k + ky) * k + kx]
                                        * x.data[(ci * x.h + sy as usize) * x.w + sx as usize];
                                }
                            }
                        }
                    }
                    out.data[(o * x.h + y) * x.w + xx] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in [1, 3] {
            let x = rand_tensor(3, 5, 6, &mut rng);
            let shape = ConvShape { cin: 3, cout: 4, kernel: k };
            let w: Vec<f64> = (0..shape.weight_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = conv_forward(&x, &w, &b, shape, false);
            let want = naive_conv(&x, &w, &b, 4, k);
            for (a, e) in got.data.iter().zip(&want.data) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (k, relu) in [(3, true), (3, false), (1, true)] {
            let x = rand_tensor(2, 4, 5, &mut rng);
            let shape = ConvShape { cin: 2, cout: 3, kernel: k };
            let w: Vec<f64> = (0..shape.weight_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-0.2..0.2)).collect();
            let probe: Vec<f64> = (0..3 * 20).map(|_| rng.random_range(-1.0..1.0)).collect();
            let loss = |x: &Tensor<f64>, w: &[f64], b: &[f64]| -> f64 {
                conv_forward(x, w, b, shape, relu).data.iter().zip(&probe).map(|(a, p)| a * p).sum()
            };
            let y = conv_forward(&x, &w, &b, shape, relu);
            let mut dw = vec![0.0; w.len()];
            let mut db = vec![0.0; 3];
            let dy = Tensor::from_vec(3, 4, 5, probe.clone());
            let dx = conv_backward(&x, &y, dy, &w, shape, relu, &mut dw, &mut db, true).unwrap();
            let h = 1e-6;
            for i in 0..w.len() {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[i] += h;
                wm[i] -= h;
                let fd = (loss(&x, &wp, &b) - loss(&x, &wm, &b)) / (2.0 * h);
                assert!((fd - dw[i]).abs() < 1e-6, "dw[{i}] {fd} vs {}", dw[i]);
            }
            for i in 0..3 {
                let (mut bp, mut bm) = (b.clone(), b.clone());
                bp[i] += h;
                bm[i] -= h;
                let fd = (loss(&x, &w, &bp) - loss(&x, &w, &bm)) / (2.0 * h);
                assert!((fd - db[i]).abs() < 1e-6);
            }
            for i in 0..x.data.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp.data[i] += h;
                xm.data[i] -= h;
                let fd = (loss(&xp, &w, &b) - loss(&xm, &w, &b)) / (2.0 * h);
                assert!((fd - dx.data[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), c> == <x, col2im(c)>
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_tensor(2, 3, 4, &mut rng);
        let c: Vec<f64> = (0..2 * 9 * 12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut cols = vec![0.0; c.len()];
        im2col3(&x.data, 2, 3, 4, &mut cols);
        let mut back = vec![0.0; x.data.len()];
        col2im3(&c, 2, 3, 4, &mut back);
        let lhs: f64 = cols.iter().zip(&c).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn pool_and_upsample_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_tensor(2, 4, 6, &mut rng);
        let (p, idx) = maxpool2_forward(&x);
        assert_eq!((p.c, p.h, p.w), (2, 2, 3));
        for (v, &i) in p.data.iter().zip(&idx) {
            assert_eq!(*v, x.data[i as usize]);
        }
        let mut dx = Tensor::zeros(2, 4, 6);
        maxpool2_backward(&Tensor::from_vec(2, 2, 3, vec![1.0; 12]), &idx, &mut dx);
        assert_eq!(dx.data.iter().sum::<f64>(), 12.0);

        let u = upsample2_forward(&p);
        assert_eq!((u.h, u.w), (4, 6));
        assert_eq!(u.data[0], u.data[7]);
        // Adjointness of upsampling.
        let g = rand_tensor(2, 4, 6, &mut rng);
        let lhs: f64 = u.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = p.data.iter().zip(&upsample2_backward(&g).data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn concat_then_split_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = rand_tensor(2, 3, 3, &mut rng);
        let b = rand_tensor(3, 3, 3, &mut rng);
        let (a2, b2) = split_channels(concat_channels(&a, &b), 2);
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }
}
