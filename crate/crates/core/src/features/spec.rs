use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::normalize::NormalizerSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaseFeature {
    Mfcc,
    Lpc,
    Plp,
}

impl BaseFeature {
    pub fn name(self) -> &'static str {
        match self {
            BaseFeature::Mfcc => "mfcc",
            BaseFeature::Lpc => "lpc",
            BaseFeature::Plp => "plp",
        }
    }

    /// Static coefficient count used when the spec string gives none.
    pub fn default_count(self) -> usize {
        match self {
            BaseFeature::Mfcc => 12,
            BaseFeature::Lpc => 13,
            BaseFeature::Plp => 13,
        }
    }
}

/// Front-end description, written as comma-separated tokens such as
/// `mfcc,d2,e,cms` or `plp:13,d1@2,rasta`.
///
/// Tokens: a base (`mfcc`, `lpc`, `plp`, optionally `:<count>`), `d1`/`d2`
/// delta orders (optionally `@<offset>`), `e` for log-energy, and the
/// normalizers `cms`, `cvn`, `rasta`, `warp[:<window>]`, `gauss[:<iters>]`
/// applied in the order written.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FrontendSpec {
    pub base: BaseFeature,
    pub n_base: usize,
    pub deltas: usize,
    pub delta_d: usize,
    pub energy: bool,
    pub normalizers: Vec<NormalizerSpec>,
}

impl FrontendSpec {
    pub fn new(base: BaseFeature) -> Self {
        Self {
            base,
            n_base: base.default_count(),
            deltas: 0,
            delta_d: 1,
            energy: false,
            normalizers: Vec::new(),
        }
    }

    /// Output dimension: static columns (coefficients plus energy) times
    /// `1 + deltas`.
    pub fn dim(&self) -> usize {
        (self.n_base + usize::from(self.energy)) * (1 + self.deltas)
    }

    pub fn has_rasta(&self) -> bool {
        self.normalizers.contains(&NormalizerSpec::Rasta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_base == 0 {
            return Err(Error::Config("coefficient count must be positive".into()));
        }
        if self.base == BaseFeature::Plp && self.n_base < 2 {
            return Err(Error::Config("PLP needs at least 2 cepstra".into()));
        }
        if self.deltas > 2 {
            return Err(Error::Config(format!("delta order {} > 2", self.deltas)));
        }
        if !(1..=2).contains(&self.delta_d) {
            return Err(Error::Config(format!(
                "delta offset {} not in {{1, 2}}",
                self.delta_d
            )));
        }
        let rasta = self
            .normalizers
            .iter()
            .filter(|n| **n == NormalizerSpec::Rasta)
            .count();
        if rasta > 1 || (rasta == 1 && self.base != BaseFeature::Plp) {
            return Err(Error::Config(
                "rasta applies once, inside the PLP front-end only".into(),
            ));
        }
        for n in &self.normalizers {
            n.validate()?;
        }
        Ok(())
    }
}

impl fmt::Display for FrontendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.base.name())?;
        if self.n_base != self.base.default_count() {
            write!(f, ":{}", self.n_base)?;
        }
        if self.deltas > 0 {
            write!(f, ",d{}", self.deltas)?;
            if self.delta_d != 1 {
                write!(f, "@{}", self.delta_d)?;
            }
        }
        if self.energy {
            f.write_str(",e")?;
        }
        for n in &self.normalizers {
            write!(f, ",{n}")?;
        }
        Ok(())
    }
}

fn parse_count(tok: &str, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Config(format!("bad number in front-end token {tok:?}")))
}

impl FromStr for FrontendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split(',').map(str::trim).filter(|t| !t.is_empty());
        let first = tokens
            .next()
            .ok_or_else(|| Error::Config("empty front-end spec".into()))?
            .to_ascii_lowercase();
        let (name, count) = match first.split_once(':') {
            Some((n, c)) => (n.to_string(), Some(parse_count(&first, c)?)),
            None => (first.clone(), None),
        };
        let base = match name.as_str() {
            "mfcc" => BaseFeature::Mfcc,
            "lpc" => BaseFeature::Lpc,
            "plp" => BaseFeature::Plp,
            other => return Err(Error::Config(format!("unknown base feature {other:?}"))),
        };
        let mut spec = FrontendSpec::new(base);
        if let Some(c) = count {
            spec.n_base = c;
        }
        let mut seen_delta = false;
        for tok in tokens {
            let tok = tok.to_ascii_lowercase();
            match tok.as_str() {
                "e" | "energy" => spec.energy = true,
                t if t.starts_with('d')
                    && t[1..].chars().next().is_some_and(|c| c.is_ascii_digit()) =>
                {
                    if seen_delta {
                        return Err(Error::Config("delta token given twice".into()));
                    }
                    seen_delta = true;
                    let (order, offset) = match t[1..].split_once('@') {
                        Some((o, d)) => (parse_count(&tok, o)?, parse_count(&tok, d)?),
                        None => (parse_count(&tok, &t[1..])?, 1),
                    };
                    spec.deltas = order;
                    spec.delta_d = offset;
                }
                t => spec.normalizers.push(t.parse()?),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}
