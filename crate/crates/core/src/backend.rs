//! Slot-wise emulation of a leveled CKKS evaluator.
//!
//! Every ciphertext is a vector of `f64` slots plus the multiplicative depth
//! it has consumed. The context counts operations so that circuit costs can be
//! audited without running real cryptography.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spin::RwLock;

use crate::error::{invalid, Error, Result};

/// Largest slot count accepted by [`EvalContext::new`].
pub const MAX_SLOTS: usize = 1 << 22;

/// Depth budget that fits the frequency pipeline with headroom.
pub const DEFAULT_DEPTH_BUDGET: usize = 65;

static NEXT_CONTEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Construction parameters for an [`EvalContext`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContextParams {
    pub slot_count: usize,
    pub depth_budget: usize,
    /// Standard deviation of the Gaussian error injected after every
    /// multiplication. Zero disables noise.
    pub noise_stddev: f64,
    pub rng_seed: u64,
}

impl ContextParams {
    pub fn new(slot_count: usize) -> Self {
        ContextParams { slot_count, depth_budget: DEFAULT_DEPTH_BUDGET, noise_stddev: 0.0, rng_seed: 0 }
    }
}

/// Snapshot of the operation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OpCounts {
    pub cipher_mults: u64,
    pub plain_mults: u64,
    pub rotations: u64,
    pub additions: u64,
    pub comparisons: u64,
}

impl OpCounts {
    /// Multiplications of either kind.
    pub fn mults(&self) -> u64 {
        self.cipher_mults + self.plain_mults
    }
}

impl core::ops::Sub for OpCounts {
    type Output = OpCounts;

    fn sub(self, rhs: OpCounts) -> OpCounts {
        OpCounts {
            cipher_mults: self.cipher_mults - rhs.cipher_mults,
            plain_mults: self.plain_mults - rhs.plain_mults,
            rotations: self.rotations - rhs.rotations,
            additions: self.additions - rhs.additions,
            comparisons: self.comparisons - rhs.comparisons,
        }
    }
}

#[derive(Default)]
struct Counters {
    cipher_mults: AtomicU64,
    plain_mults: AtomicU64,
    rotations: AtomicU64,
    additions: AtomicU64,
    comparisons: AtomicU64,
    max_depth: AtomicUsize,
    noise_draws: AtomicU64,
}

/// Encrypted slot vector. Only the owning context may operate on it.
#[derive(Debug, Clone, PartialEq)]
pub struct CipherVector {
    context: u64,
    slots: Vec<f64>,
    depth: usize,
}

impl CipherVector {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Reads the slots back. In a deployment this is decryption by the key holder.
    pub fn decode(&self) -> &[f64] {
        &self.slots
    }
}

/// Unencrypted slot vector used for masks and constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainVector {
    slots: Vec<f64>,
}

impl PlainVector {
    pub fn new(slots: Vec<f64>) -> Self {
        PlainVector { slots }
    }

    pub fn filled(len: usize, value: f64) -> Self {
        PlainVector { slots: alloc::vec![value; len] }
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> f64) -> Self {
        PlainVector { slots: (0..len).map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.slots
    }

    /// Slot-wise product with a scalar.
    pub fn scaled(&self, factor: f64) -> PlainVector {
        PlainVector { slots: self.slots.iter().map(|v| v * factor).collect() }
    }
}

/// Key under which a context caches a derived plaintext mask.
pub type MaskKey = (&'static str, [u64; 4]);

/// Owner of the slot layout, the depth budget and all operation counters.
///
/// The context is `Send + Sync`; counters are atomic and the mask cache sits
/// behind a reader-writer lock.
pub struct EvalContext {
    id: u64,
    params: ContextParams,
    counters: Counters,
    masks: RwLock<BTreeMap<MaskKey, Arc<PlainVector>>>,
}

impl core::fmt::Debug for EvalContext {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("EvalContext")
            .field("id", &self.id)
            .field("params", &self.params)
            .field("counts", &self.counts())
            .finish()
    }
}

impl EvalContext {
    pub fn new(params: ContextParams) -> Result<Self> {
        let n = params.slot_count;
        if n == 0 || !n.is_power_of_two() || n > MAX_SLOTS {
            return Err(invalid("slot count must be a power of two in [1, 2^22]"));
        }
        if params.depth_budget == 0 {
            return Err(invalid("depth budget must be positive"));
        }
        if !(params.noise_stddev >= 0.0 && params.noise_stddev.is_finite()) {
            return Err(invalid("noise standard deviation must be finite and non-negative"));
        }
        Ok(EvalContext {
            id: NEXT_CONTEXT_ID.fetch_add(1, Ordering::Relaxed),
            params,
            counters: Counters::default(),
            masks: RwLock::new(BTreeMap::new()),
        })
    }

    pub fn params(&self) -> &ContextParams {
        &self.params
    }

    pub fn slot_count(&self) -> usize {
        self.params.slot_count
    }

    pub fn depth_budget(&self) -> usize {
        self.params.depth_budget
    }

    pub fn counts(&self) -> OpCounts {
        let c = &self.counters;
        OpCounts {
            cipher_mults: c.cipher_mults.load(Ordering::Relaxed),
            plain_mults: c.plain_mults.load(Ordering::Relaxed),
            rotations: c.rotations.load(Ordering::Relaxed),
            additions: c.additions.load(Ordering::Relaxed),
            comparisons: c.comparisons.load(Ordering::Relaxed),
        }
    }

    /// Deepest ciphertext produced so far.
    pub fn max_depth(&self) -> usize {
        self.counters.max_depth.load(Ordering::Relaxed)
    }

    /// Records one SIMD comparison. Called by the comparator circuits.
    pub fn record_comparison(&self) {
        self.counters.comparisons.fetch_add(1, Ordering::Relaxed);
    }

    /// Encrypts `values` into the leading slots; the remainder is zero.
    pub fn encrypt(&self, values: &[f64]) -> Result<CipherVector> {
        if values.len() > self.slot_count() {
            return Err(Error::Capacity { len: values.len(), slots: self.slot_count() });
        }
        let mut slots = alloc::vec![0.0; self.slot_count()];
        slots[..values.len()].copy_from_slice(values);
        Ok(self.wrap(slots, 0))
    }

    /// Plaintext encoding padded with zeros to the slot count.
    pub fn encode(&self, values: &[f64]) -> Result<PlainVector> {
        if values.len() > self.slot_count() {
            return Err(Error::Capacity { len: values.len(), slots: self.slot_count() });
        }
        let mut slots = alloc::vec![0.0; self.slot_count()];
        slots[..values.len()].copy_from_slice(values);
        Ok(PlainVector::new(slots))
    }

    /// Returns the cached mask for `key`, building it on first use.
    pub fn mask(&self, key: MaskKey, build: impl FnOnce(usize) -> Vec<f64>) -> Arc<PlainVector> {
        if let Some(found) = self.masks.read().get(&key) {
            return found.clone();
        }
        let built = Arc::new(PlainVector::new(build(self.slot_count())));
        debug_assert_eq!(built.len(), self.slot_count());
        self.masks.write().entry(key).or_insert(built).clone()
    }

    pub fn add(&self, x: &CipherVector, y: &CipherVector) -> Result<CipherVector> {
        self.check_pair(x, y)?;
        self.counters.additions.fetch_add(1, Ordering::Relaxed);
        let slots = x.slots.iter().zip(&y.slots).map(|(a, b)| a + b).collect();
        Ok(self.wrap(slots, x.depth.max(y.depth)))
    }

    pub fn sub(&self, x: &CipherVector, y: &CipherVector) -> Result<CipherVector> {
        self.check_pair(x, y)?;
        self.counters.additions.fetch_add(1, Ordering::Relaxed);
        let slots = x.slots.iter().zip(&y.slots).map(|(a, b)| a - b).collect();
        Ok(self.wrap(slots, x.depth.max(y.depth)))
    }

    pub fn add_plain(&self, x: &CipherVector, p: &PlainVector) -> Result<CipherVector> {
        self.check_one(x)?;
        self.check_plain(p)?;
        self.counters.additions.fetch_add(1, Ordering::Relaxed);
        let slots = x.slots.iter().zip(&p.slots).map(|(a, b)| a + b).collect();
        Ok(self.wrap(slots, x.depth))
    }

    pub fn sub_plain(&self, x: &CipherVector, p: &PlainVector) -> Result<CipherVector> {
        self.check_one(x)?;
        self.check_plain(p)?;
        self.counters.additions.fetch_add(1, Ordering::Relaxed);
        let slots = x.slots.iter().zip(&p.slots).map(|(a, b)| a - b).collect();
        Ok(self.wrap(slots, x.depth))
    }

    /// Computes `p - x`.
    pub fn plain_sub(&self, p: &PlainVector, x: &CipherVector) -> Result<CipherVector> {
        self.check_one(x)?;
        self.check_plain(p)?;
        self.counters.additions.fetch_add(1, Ordering::Relaxed);
        let slots = p.slots.iter().zip(&x.slots).map(|(a, b)| a - b).collect();
        Ok(self.wrap(slots, x.depth))
    }

    /// Adds the same constant to every slot.
    pub fn add_const(&self, x: &CipherVector, c: f64) -> Result<CipherVector> {
        self.check_one(x)?;
        self.counters.additions.fetch_add(1, Ordering::Relaxed);
        Ok(self.wrap(x.slots.iter().map(|a| a + c).collect(), x.depth))
    }

    /// Ciphertext-ciphertext product; consumes one level.
    pub fn mul(&self, x: &CipherVector, y: &CipherVector) -> Result<CipherVector> {
        self.check_pair(x, y)?;
        let depth = self.next_depth(x.depth.max(y.depth))?;
        self.counters.cipher_mults.fetch_add(1, Ordering::Relaxed);
        let slots = x.slots.iter().zip(&y.slots).map(|(a, b)| a * b).collect();
        Ok(self.noisy(slots, depth))
    }

    /// Ciphertext-plaintext product; consumes one level.
    pub fn mul_plain(&self, x: &CipherVector, p: &PlainVector) -> Result<CipherVector> {
        self.check_one(x)?;
        self.check_plain(p)?;
        let depth = self.next_depth(x.depth)?;
        self.counters.plain_mults.fetch_add(1, Ordering::Relaxed);
        let slots = x.slots.iter().zip(&p.slots).map(|(a, b)| a * b).collect();
        Ok(self.noisy(slots, depth))
    }

    /// Product with a scalar constant, accounted as a plaintext multiplication.
    pub fn mul_const(&self, x: &CipherVector, c: f64) -> Result<CipherVector> {
        self.check_one(x)?;
        let depth = self.next_depth(x.depth)?;
        self.counters.plain_mults.fetch_add(1, Ordering::Relaxed);
        Ok(self.noisy(x.slots.iter().map(|a| a * c).collect(), depth))
    }

    /// Cyclic rotation: slot `i` of the result holds slot `i + k` of the input.
    /// Positive `k` rotates left, negative `k` rotates right.
    pub fn rotate(&self, x: &CipherVector, k: isize) -> Result<CipherVector> {
        self.check_one(x)?;
        self.counters.rotations.fetch_add(1, Ordering::Relaxed);
        let n = x.slots.len();
        let shift = k.rem_euclid(n as isize) as usize;
        let mut slots = Vec::with_capacity(n);
        slots.extend_from_slice(&x.slots[shift..]);
        slots.extend_from_slice(&x.slots[..shift]);
        Ok(self.wrap(slots, x.depth))
    }

    fn wrap(&self, slots: Vec<f64>, depth: usize) -> CipherVector {
        self.counters.max_depth.fetch_max(depth, Ordering::Relaxed);
        CipherVector { context: self.id, slots, depth }
    }

    fn noisy(&self, mut slots: Vec<f64>, depth: usize) -> CipherVector {
        let sd = self.params.noise_stddev;
        if sd > 0.0 {
            let draw = self.counters.noise_draws.fetch_add(1, Ordering::Relaxed);
            let mut rng = ChaCha8Rng::seed_from_u64(self.params.rng_seed);
            rng.set_stream(draw);
            let normal = Normal::new(0.0, sd).expect("validated standard deviation");
            for v in &mut slots {
                *v += normal.sample(&mut rng);
            }
        }
        self.wrap(slots, depth)
    }

    fn next_depth(&self, depth: usize) -> Result<usize> {
        let required = depth + 1;
        if required > self.params.depth_budget {
            return Err(Error::DepthOverflow { required, budget: self.params.depth_budget });
        }
        Ok(required)
    }

    fn check_one(&self, x: &CipherVector) -> Result<()> {
        if x.context != self.id {
            return Err(Error::ContextMismatch);
        }
        Ok(())
    }

    fn check_pair(&self, x: &CipherVector, y: &CipherVector) -> Result<()> {
        self.check_one(x)?;
        self.check_one(y)
    }

    fn check_plain(&self, p: &PlainVector) -> Result<()> {
        if p.len() != self.slot_count() {
            return Err(Error::LengthMismatch { expected: self.slot_count(), found: p.len() });
        }
        Ok(())
    }
}
