use crate::error::{Error, Result};

/// Block lengths `τ_n = ⌊c nᵃ⌋` or a constant length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockSchedule {
    Polynomial { c: f64, a: f64 },
    Fixed(usize),
}

impl BlockSchedule {
    pub fn polynomial(c: f64, a: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("schedule constant c = {c} must be positive")));
        }
        if !(a >= 1.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("schedule exponent a = {a} must be at least 1")));
        }
        if a == 1.0 {
            log::warn!("schedule exponent a = 1 gives linearly growing blocks, outside the convergence regime a > 1");
        }
        Ok(BlockSchedule::Polynomial { c, a })
    }

    pub fn fixed(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("fixed block size must be at least 1".into()));
        }
        Ok(BlockSchedule::Fixed(size))
    }

    /// `τ_n` for `n >= 1`. A polynomial length that floors to 0 is promoted to 1.
    pub fn block_size(&self, n: usize) -> usize {
        assert!(n >= 1, "blocks are numbered from 1");
        match *self {
            BlockSchedule::Fixed(size) => size,
            BlockSchedule::Polynomial { c, a } => {
                let tau = (c * (n as f64).powf(a)).floor() as usize;
                if tau == 0 {
                    log::warn!("block {n}: ⌊c nᵃ⌋ = 0 promoted to 1");
                    1
                } else {
                    tau
                }
            }
        }
    }

    /// `T_n = Σ_{i<=n} τ_i`, with `T_0 = 0`.
    pub fn cumulative(&self, n: usize) -> usize {
        (1..=n).map(|i| self.block_size(i)).sum()
    }

    /// `(start, len)` of every complete block fitting in `total` observations.
    /// A trailing partial block is not consumed.
    pub fn blocks_within(&self, total: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        for n in 1.. {
            let tau = self.block_size(n);
            if start + tau > total {
                break;
            }
            out.push((start, tau));
            start += tau;
        }
        out
    }
}
