use ndarray::{s, Array1, Array2, Axis};

use super::{glorot, Real};
use crate::rng::SeededRng;

/// Gated recurrent unit with gates stacked as `[reset | update | candidate]`:
///
/// ```text
/// r  = σ(x·Wr + h·Ur + br)
/// z  = σ(x·Wz + h·Uz + bz)
/// n  = tanh(x·Wn + r ⊙ (h·Un) + bn)
/// h' = z ⊙ h + (1 − z) ⊙ n
/// ```
///
/// Rows whose mask is 0 carry `h` through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Gru<F> {
    /// input × 3·hidden
    pub w: Array2<F>,
    /// hidden × 3·hidden
    pub u: Array2<F>,
    pub b: Array1<F>,
}

#[derive(Debug, Clone)]
pub(crate) struct GruCache<F> {
    x: Array2<F>,
    h: Array2<F>,
    r: Array2<F>,
    z: Array2<F>,
    n: Array2<F>,
    /// h·Un, before the reset gate is applied
    hn: Array2<F>,
    mask: Option<Array2<F>>,
}

impl<F: Real> Gru<F> {
    pub fn new(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        Gru {
            w: glorot(input, 3 * hidden, rng),
            u: glorot(hidden, 3 * hidden, rng),
            b: Array1::zeros(3 * hidden),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Gru {
            w: Array2::zeros(self.w.raw_dim()),
            u: Array2::zeros(self.u.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.nrows()
    }

    pub fn input(&self) -> usize {
        self.w.nrows()
    }

    pub(crate) fn step(
        &self,
        x: &Array2<F>,
        h: &Array2<F>,
        mask: Option<&Array2<F>>,
    ) -> (Array2<F>, GruCache<F>) {
        let hd = self.hidden();
        let gx = x.dot(&self.w) + &self.b;
        let gh = h.dot(&self.u);
        let one = F::one();

        let r = (&gx.slice(s![.., ..hd]) + &gh.slice(s![.., ..hd])).mapv(sigmoid);
        let z = (&gx.slice(s![.., hd..2 * hd]) + &gh.slice(s![.., hd..2 * hd])).mapv(sigmoid);
        let hn = gh.slice(s![.., 2 * hd..]).to_owned();
        let n = (&gx.slice(s![.., 2 * hd..]) + &(&r * &hn)).mapv(F::tanh);

        let mut out = &z * h + &(z.mapv(|v| one - v) * &n);
        if let Some(m) = mask {
            out = &out * m + &(m.mapv(|v| one - v) * h);
        }
        let cache = GruCache {
            x: x.clone(),
            h: h.clone(),
            r,
            z,
            n,
            hn,
            mask: mask.cloned(),
        };
        (out, cache)
    }

    /// Backpropagates one step. Accumulates parameter gradients into `grad`
    /// and returns the gradients with respect to the input and previous state.
    pub(crate) fn step_back(
        &self,
        cache: &GruCache<F>,
        d_out: &Array2<F>,
        grad: &mut Gru<F>,
    ) -> (Array2<F>, Array2<F>) {
        let hd = self.hidden();
        let one = F::one();
        let GruCache {
            x,
            h,
            r,
            z,
            n,
            hn,
            mask,
        } = cache;

        let (d_new, mut dh) = match mask {
            Some(m) => (d_out * m, d_out * &m.mapv(|v| one - v)),
            None => (d_out.clone(), Array2::zeros(d_out.raw_dim())),
        };

        let dz = &d_new * &(h - n);
        let dn = &d_new * &z.mapv(|v| one - v);
        dh += &(&d_new * z);

        let dn_pre = dn * &n.mapv(|v| one - v * v);
        let dr = &dn_pre * hn;
        let dr_pre = dr * &r.mapv(|v| v * (one - v));
        let dz_pre = dz * &z.mapv(|v| v * (one - v));

        let rows = x.nrows();
        let mut dgx = Array2::zeros((rows, 3 * hd));
        dgx.slice_mut(s![.., ..hd]).assign(&dr_pre);
        dgx.slice_mut(s![.., hd..2 * hd]).assign(&dz_pre);
        dgx.slice_mut(s![.., 2 * hd..]).assign(&dn_pre);
        let mut dgh = dgx.clone();
        dgh.slice_mut(s![.., 2 * hd..]).assign(&(&dn_pre * r));

        grad.w += &x.t().dot(&dgx);
        grad.b += &dgx.sum_axis(Axis(0));
        grad.u += &h.t().dot(&dgh);

        let dx = dgx.dot(&self.w.t());
        dh += &dgh.dot(&self.u.t());
        (dx, dh)
    }
}

fn sigmoid<F: Real>(v: F) -> F {
    F::one() / (F::one() + (-v).exp())
}
