//! Seeded samplers for drawing validation data without replacement, and the
//! train/validation subsampling procedure whose two outputs are distributed
//! like two independent uniform draws from the whole population.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::hypergeom_pmf;
use crate::error::{Error, Result};

/// Generator for one experiment stream. ChaCha is counter based and exposes
/// 2^64 independent streams per seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, 0)
}

/// Uniform size-`s` subset of `0..n`, returned ascending.
pub fn sample_indices<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Result<Vec<usize>> {
    if s > n {
        return Err(Error::InvalidSampleSize {
            s: s as u64,
            n: n as u64,
        });
    }
    let mut picked = index::sample(rng, n, s).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Uniform size-`s` subset of `universe`, kept in universe order.
pub fn sample_without_replacement<T: Clone, R: Rng + ?Sized>(
    universe: &[T],
    s: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    Ok(sample_indices(universe.len(), s, rng)?
        .into_iter()
        .map(|i| universe[i].clone())
        .collect())
}

/// Number of successes among `s` draws from a population of `n` holding
/// `t` successes, by inverse CDF over the exact pmf.
pub fn hypergeometric_draw<R: Rng + ?Sized>(n: u64, t: u64, s: u64, rng: &mut R) -> Result<u64> {
    if t > n || s > n {
        return Err(Error::InvalidHypergeomParams { m: t, n, s, k: 0 });
    }
    let lo = s.saturating_sub(n - t);
    let hi = t.min(s);
    if lo == hi {
        return Ok(lo);
    }
    let u: f64 = rng.random();
    let mut cdf = 0.0;
    for i in lo..hi {
        cdf += hypergeom_pmf(t, n, s, i)?;
        if u < cdf {
            return Ok(i);
        }
    }
    Ok(hi)
}

/// Source of the random choices the subsampling procedure makes.
pub trait SplitChoices {
    /// Uniform size-`k` subset of `0..n`, ascending.
    fn subset(&mut self, n: usize, k: usize) -> Result<Vec<usize>>;
    /// Hypergeometric count: population `n`, `t` successes, `s` draws.
    fn hypergeometric(&mut self, n: u64, t: u64, s: u64) -> Result<u64>;
}

pub struct RngChoices<R>(pub R);

impl<R: Rng> SplitChoices for RngChoices<R> {
    fn subset(&mut self, n: usize, k: usize) -> Result<Vec<usize>> {
        sample_indices(n, k, &mut self.0)
    }

    fn hypergeometric(&mut self, n: u64, t: u64, s: u64) -> Result<u64> {
        hypergeometric_draw(n, t, s, &mut self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec<T> {
    /// Size of the population the labeled sample was drawn from.
    pub population_n: u64,
    /// The verified sample, itself a uniform draw without replacement.
    pub labeled: Vec<T>,
    pub t: usize,
    pub s: usize,
    pub rng_seed: u64,
}

impl<T> SplitSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.t + self.s != self.labeled.len() {
            return Err(Error::InvalidConfig(format!(
                "t + s = {} but the labeled sample has {} items",
                self.t + self.s,
                self.labeled.len()
            )));
        }
        if self.labeled.len() as u64 > self.population_n {
            return Err(Error::InvalidConfig(format!(
                "labeled sample ({}) larger than population ({})",
                self.labeled.len(),
                self.population_n
            )));
        }
        Ok(())
    }
}

/// Splits the labeled sample into a training subsample and a validation
/// subsample that may overlap. Returns `(train, validation)`.
pub fn split_train_validation<T: Clone>(spec: &SplitSpec<T>) -> Result<(Vec<T>, Vec<T>)> {
    split_with(spec, &mut RngChoices(seeded_rng(spec.rng_seed)))
}

/// The five-step procedure, drawing its randomness from `choices`:
///
/// 1. `T` = uniform size-`t` subset of the labeled sample `L`;
/// 2. `i` ~ hypergeometric(population `n`, `t` successes, `s` draws);
/// 3. `i` items uniformly from `T`;
/// 4. `s - i` items uniformly from `L \ T`;
/// 5. the validation sample is the union of steps 3 and 4.
pub fn split_with<T: Clone, C: SplitChoices + ?Sized>(
    spec: &SplitSpec<T>,
    choices: &mut C,
) -> Result<(Vec<T>, Vec<T>)> {
    spec.validate()?;
    let l = spec.labeled.len();
    let in_train = choices.subset(l, spec.t)?;
    let mut is_train = vec![false; l];
    for &p in &in_train {
        is_train[p] = true;
    }
    let rest: Vec<usize> = (0..l).filter(|&p| !is_train[p]).collect();

    let i = choices.hypergeometric(spec.population_n, spec.t as u64, spec.s as u64)? as usize;
    let from_train = choices.subset(spec.t, i)?;
    let from_rest = choices.subset(rest.len(), spec.s - i)?;

    let train = in_train.iter().map(|&p| spec.labeled[p].clone()).collect();
    let validation = from_train
        .iter()
        .map(|&j| spec.labeled[in_train[j]].clone())
        .chain(from_rest.iter().map(|&j| spec.labeled[rest[j]].clone()))
        .collect();
    Ok((train, validation))
}

/// Plain disjoint partition of the labeled sample.
///
/// The two parts are NOT distributed as independent draws from the
/// population: the training part excludes the validation part by
/// construction, so bounds computed on a matcher trained on it are not
/// covered by the holdout guarantees. Use [`split_train_validation`] for that.
pub fn disjoint_split<T: Clone, R: Rng + ?Sized>(
    labeled: &[T],
    t: usize,
    rng: &mut R,
) -> Result<(Vec<T>, Vec<T>)> {
    let picked = sample_indices(labeled.len(), t, rng)?;
    let mut is_train = vec![false; labeled.len()];
    for &p in &picked {
        is_train[p] = true;
    }
    let (train, rest): (Vec<_>, Vec<_>) = labeled
        .iter()
        .cloned()
        .zip(is_train)
        .partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(v, _)| v).collect(),
        rest.into_iter().map(|(v, _)| v).collect(),
    ))
}
