use num_complex::Complex64 as C64;

/// Kahan–Neumaier accumulator, applied componentwise to complex values.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: C64,
    comp: C64,
}

#[inline]
fn two_sum(acc: f64, comp: &mut f64, x: f64) -> f64 {
    let s = acc + x;
    if acc.abs() >= x.abs() {
        *comp += (acc - s) + x;
    } else {
        *comp += (x - s) + acc;
    }
    s
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: C64) {
        self.sum.re = two_sum(self.sum.re, &mut self.comp.re, x.re);
        self.sum.im = two_sum(self.sum.im, &mut self.comp.im, x.im);
    }

    pub fn value(&self) -> C64 {
        self.sum + self.comp
    }
}

const LEAF: usize = 64;

/// Fixed-order pairwise summation with compensated leaves.
///
/// The split points depend only on the slice length, so the result is
/// independent of how the slice was produced.
pub fn pairwise_sum(xs: &[C64]) -> C64 {
    if xs.len() <= LEAF {
        let mut acc = NeumaierSum::new();
        for &x in xs {
            acc.add(x);
        }
        return acc.value();
    }
    let mid = xs.len() / 2;
    let mut acc = NeumaierSum::new();
    acc.add(pairwise_sum(&xs[..mid]));
    acc.add(pairwise_sum(&xs[mid..]));
    acc.value()
}
