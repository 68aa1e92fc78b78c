//! The classifier interface counterfactuals are generated against.

use alloc::vec::Vec;

use crate::dataset::{Class, Instance};
use crate::Result;

/// A binary classifier `a(x)`.
///
/// Implementations must be pure: equal inputs always yield equal classes.
/// `predict` returns a `Result` because some predictors (a subprocess, for
/// instance) can fail; failures are never turned into a class.
pub trait Predictor: Send + Sync {
    fn predict(&self, x: &[f64]) -> Result<Class>;

    fn predict_batch(&self, xs: &[Instance]) -> Result<Vec<Class>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict(&self, x: &[f64]) -> Result<Class> {
        (**self).predict(x)
    }

    fn predict_batch(&self, xs: &[Instance]) -> Result<Vec<Class>> {
        (**self).predict_batch(xs)
    }
}

impl<P: Predictor + ?Sized> Predictor for alloc::boxed::Box<P> {
    fn predict(&self, x: &[f64]) -> Result<Class> {
        (**self).predict(x)
    }

    fn predict_batch(&self, xs: &[Instance]) -> Result<Vec<Class>> {
        (**self).predict_batch(xs)
    }
}

/// Wraps a plain function as a predictor. Handy for hand-built decision
/// rules in tests and examples.
pub struct FnPredictor<F>(pub F);

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&[f64]) -> Class + Send + Sync,
{
    fn predict(&self, x: &[f64]) -> Result<Class> {
        Ok((self.0)(x))
    }
}

/// Fraction of rows whose prediction matches the label.
pub fn accuracy(model: &dyn Predictor, rows: &[Instance], labels: &[Class]) -> Result<f64> {
    if rows.is_empty() {
        return Ok(0.0);
    }
    let preds = model.predict_batch(rows)?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / rows.len() as f64)
}
