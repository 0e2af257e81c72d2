use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use super::{Objective, ObjectiveError};
use crate::space::ParamVector;

type Slot = Arc<Mutex<Option<f64>>>;

/// Caches fitness by parameter vector.
///
/// Concurrent callers asking for the same vector share one slot, so the inner
/// objective runs at most once per key. Failed evaluations are not cached.
pub struct Memoized<O> {
    inner: O,
    cache: Mutex<HashMap<ParamVector, Slot>>,
    inner_calls: AtomicU64,
    hits: AtomicU64,
}

impl<O: Objective> Memoized<O> {
    pub fn new(inner: O) -> Self {
        Memoized {
            inner,
            cache: Mutex::new(HashMap::new()),
            inner_calls: AtomicU64::new(0),
            hits: AtomicU64::new(0),
        }
    }

    pub fn inner_calls(&self) -> u64 {
        self.inner_calls.load(Ordering::SeqCst)
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Objective> Objective for Memoized<O> {
    fn evaluate(&self, params: &ParamVector, eval_id: u64) -> Result<f64, ObjectiveError> {
        let slot = {
            let mut cache = self.cache.lock().unwrap();
            Arc::clone(cache.entry(params.clone()).or_default())
        };
        let mut value = slot.lock().unwrap();
        if let Some(v) = *value {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(v);
        }
        self.inner_calls.fetch_add(1, Ordering::SeqCst);
        let v = self.inner.evaluate(params, eval_id)?;
        *value = Some(v);
        Ok(v)
    }

    fn distinct_evaluations(&self) -> Option<u64> {
        Some(self.inner_calls())
    }
}
