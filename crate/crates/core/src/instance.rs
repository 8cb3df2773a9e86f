use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::items::MAX_ITEMS;
use crate::scalar::{Rational, Scalar};
use crate::valuations::{KeepRate, ProxyValuation, Valuation};

/// `n` bidders with one valuation each over a common set of `m` items.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T> {
    m: usize,
    bidders: Vec<Valuation<T>>,
}

impl<T: Scalar> Instance<T> {
    pub fn new(m: usize, bidders: Vec<Valuation<T>>) -> Result<Self> {
        if m == 0 || m > MAX_ITEMS {
            return Err(Error::Parameter(format!("item count must be in 1..={MAX_ITEMS}, got {m}")));
        }
        if bidders.is_empty() {
            return Err(Error::Parameter("an instance needs at least one bidder".into()));
        }
        for (i, v) in bidders.iter().enumerate() {
            if v.item_count() != m {
                return Err(Error::MalformedValuation(format!(
                    "bidder {i} is defined over {} items, instance has {m}",
                    v.item_count()
                )));
            }
        }
        Ok(Instance { m, bidders })
    }

    pub fn items(&self) -> usize {
        self.m
    }

    pub fn bidders(&self) -> usize {
        self.bidders.len()
    }

    pub fn valuations(&self) -> &[Valuation<T>] {
        &self.bidders
    }

    pub fn valuation(&self, bidder: usize) -> &Valuation<T> {
        &self.bidders[bidder]
    }

    pub fn proxies(&self, rate: KeepRate, caps: &Caps) -> Vec<ProxyValuation<T>> {
        self.bidders
            .iter()
            .map(|v| ProxyValuation::new(v.clone(), rate).with_cap(caps.subsets))
            .collect()
    }

    /// Same instance with one bidder's valuation replaced.
    pub fn with_report(&self, bidder: usize, report: Valuation<T>) -> Result<Self> {
        let mut bidders = self.bidders.clone();
        bidders[bidder] = report;
        Instance::new(self.m, bidders)
    }

    pub fn convert<U: Scalar>(&self, f: impl Fn(&T) -> U + Copy) -> Instance<U> {
        Instance {
            m: self.m,
            bidders: self.bidders.iter().map(|v| v.convert(f)).collect(),
        }
    }
}

impl Instance<Rational> {
    pub fn to_float(&self) -> Instance<f64> {
        self.convert(f64::from_rational)
    }
}
