/// Single-sample feature map in channel-major (CHW) layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), c * h * w, "tensor data length");
        Self { c, h, w, data }
    }

    pub fn hw(&self) -> usize {
        self.h * self.w
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * self.hw()..(c + 1) * self.hw()]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let hw = self.hw();
        &mut self.data[c * hw..(c + 1) * hw]
    }

    /// Stack along the channel axis.
    pub fn concat(parts: &[&Tensor]) -> Tensor {
        let (h, w) = (parts[0].h, parts[0].w);
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.data.len()).sum());
        for p in parts {
            assert_eq!((p.h, p.w), (h, w), "concat spatial dims");
            data.extend_from_slice(&p.data);
        }
        Tensor::from_vec(parts.iter().map(|p| p.c).sum(), h, w, data)
    }

    /// Inverse of [`Tensor::concat`].
    pub fn split(&self, channels: &[usize]) -> Vec<Tensor> {
        let hw = self.hw();
        let mut start = 0;
        channels
            .iter()
            .map(|&c| {
                let t = Tensor::from_vec(c, self.h, self.w, self.data[start * hw..(start + c) * hw].to_vec());
                start += c;
                t
            })
            .collect()
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `c = a · b (+ c)` with `a: m×k`, `b: k×n`, `c: m×n`, all row-major.
/// `a_t` / `b_t` read the operand as stored transposed (`k×m`, `n×k`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f32], a_t: bool, b: &[f32], b_t: bool, c: &mut [f32], accumulate: bool) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand sizes");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above guarantee every index the strides reach is in
    // bounds, and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
