//! Write-once cache of pre-trained lower stacks.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::Result;
use crate::features::Normalizer;
use crate::network::{CleanStack, NoisyStack, PretrainTarget, TrainConfig};

/// A noisy stack with the clean stack that supervised it and the normalizer
/// its inputs were scaled with.
#[derive(Debug, Clone)]
pub struct LowerStack {
    pub normalizer: Normalizer,
    pub clean: CleanStack,
    pub noisy: NoisyStack,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub domain: String,
    pub data: u64,
    pub depth: usize,
    pub mode: PretrainTarget,
    /// Serialized training configuration, seed included.
    pub cfg: String,
}

impl CacheKey {
    pub fn new(domain: &str, data: u64, depth: usize, mode: PretrainTarget, cfg: &TrainConfig) -> Self {
        CacheKey {
            domain: domain.to_string(),
            data,
            depth,
            mode,
            cfg: serde_json::to_string(cfg).expect("config serializes"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub lookups: usize,
    pub builds: usize,
}

impl CacheStats {
    pub fn hits(&self) -> usize {
        self.lookups - self.builds
    }
}

type Slot = Arc<Mutex<Option<Arc<LowerStack>>>>;

#[derive(Debug, Default)]
pub struct StackCache {
    slots: Mutex<HashMap<CacheKey, Slot>>,
    lookups: AtomicUsize,
    builds: AtomicUsize,
    per_depth: Mutex<HashMap<usize, CacheStats>>,
}

impl StackCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the cached stack for `key`, building it on first use. Callers
    /// racing on one key wait for the single build.
    pub fn get_or_build(&self, key: CacheKey, build: impl FnOnce() -> Result<LowerStack>) -> Result<Arc<LowerStack>> {
        self.lookups.fetch_add(1, Ordering::SeqCst);
        let depth = key.depth;
        let slot = self.slots.lock().unwrap().entry(key).or_default().clone();
        let mut guard = slot.lock().unwrap();
        let built = guard.is_none();
        if built {
            *guard = Some(Arc::new(build()?));
            self.builds.fetch_add(1, Ordering::SeqCst);
        }
        let mut per = self.per_depth.lock().unwrap();
        let s = per.entry(depth).or_default();
        s.lookups += 1;
        if built {
            s.builds += 1;
        }
        Ok(guard.as_ref().unwrap().clone())
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            lookups: self.lookups.load(Ordering::SeqCst),
            builds: self.builds.load(Ordering::SeqCst),
        }
    }

    /// Statistics restricted to stacks of `depth` layers.
    pub fn stats_for_depth(&self, depth: usize) -> CacheStats {
        self.per_depth.lock().unwrap().get(&depth).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
