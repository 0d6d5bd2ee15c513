//! Compensated and log-offset accumulators.

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self {
            sum: 0.0,
            comp: 0.0,
        }
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn scale(&mut self, factor: f64) {
        self.sum *= factor;
        self.comp *= factor;
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Sum of non-negative terms `mantissa * exp(log_scale)` whose magnitudes may
/// exceed the range of `f64`. The represented value is `acc * exp(offset)`,
/// with `offset` tracking the largest scale seen so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledSum {
    acc: CompensatedSum,
    offset: f64,
}

impl Default for ScaledSum {
    fn default() -> Self {
        Self::new()
    }
}

impl ScaledSum {
    pub const fn new() -> Self {
        Self {
            acc: CompensatedSum::new(),
            offset: 0.0,
        }
    }

    pub fn add(&mut self, mantissa: f64, log_scale: f64) {
        if mantissa == 0.0 {
            return;
        }
        if self.acc.value() == 0.0 {
            self.offset = log_scale;
        } else if log_scale > self.offset {
            self.acc.scale((self.offset - log_scale).exp());
            self.offset = log_scale;
        }
        self.acc.add(mantissa * (log_scale - self.offset).exp());
    }

    /// Natural logarithm of the sum; `-inf` when empty.
    pub fn ln(&self) -> f64 {
        let v = self.acc.value();
        if v > 0.0 {
            v.ln() + self.offset
        } else {
            f64::NEG_INFINITY
        }
    }

    /// The sum as a plain `f64` (may overflow to `inf`).
    pub fn value(&self) -> f64 {
        self.acc.value() * self.offset.exp()
    }
}

/// `ln(mantissa * exp(log_scale))`, `-inf` for a zero mantissa.
pub(crate) fn ln_scaled(mantissa: f64, log_scale: f64) -> f64 {
    if mantissa > 0.0 {
        mantissa.ln() + log_scale
    } else {
        f64::NEG_INFINITY
    }
}
