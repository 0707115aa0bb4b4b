//! Shared mutable access for lock-free parallel SGD.
//!
//! Workers write to the same parameter tables without synchronization.
//! Individual `f64` loads and stores are word-sized; interleaved
//! read-modify-write sequences from different workers may lose updates,
//! which hogwild training tolerates. Single-worker runs never go through
//! this type.

pub(crate) struct Hogwild<T> {
    ptr: *mut T,
}

unsafe impl<T: Send> Send for Hogwild<T> {}
unsafe impl<T: Send> Sync for Hogwild<T> {}

impl<T> Hogwild<T> {
    pub fn new(value: &mut T) -> Self {
        Hogwild { ptr: value }
    }

    /// # Safety
    ///
    /// The referent must outlive every worker, and callers accept racy
    /// element-wise updates from other workers holding the same handle.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn get(&self) -> &mut T {
        &mut *self.ptr
    }
}

/// Derives an independent stream seed for a worker.
pub(crate) fn worker_seed(seed: u64, epoch: usize, worker: usize) -> u64 {
    // splitmix64 finalizer over the packed coordinates
    let mut z = seed
        ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (worker as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
