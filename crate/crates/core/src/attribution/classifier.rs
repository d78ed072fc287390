use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imageio::InputImage;
use crate::vit::{Prediction, TokenSequence, TokenSubset, ViTModel};

/// A classifier evaluated on subsets of a fixed set of `token_count` tokens.
///
/// `evaluate` must be pure: the same subset always yields the same
/// prediction, regardless of call order or thread.
pub trait SubsetClassifier: Sync {
    fn token_count(&self) -> usize;
    fn evaluate(&self, subset: &TokenSubset) -> Result<Prediction>;
}

/// A classifier over whole images at a fixed square resolution.
pub trait ImageClassifier: Sync {
    fn image_size(&self) -> usize;
    fn patch_size(&self) -> usize;
    fn classify(&self, img: &InputImage) -> Result<Prediction>;

    fn grid(&self) -> usize {
        self.image_size() / self.patch_size()
    }
}

/// Image models that can also be evaluated with tokens discarded.
pub trait TokenModel: ImageClassifier {
    fn subset_classifier<'a>(&'a self, img: &InputImage) -> Result<Box<dyn SubsetClassifier + 'a>>;
}

/// One image's embedded tokens bound to a ViT.
pub struct ViTSubsetClassifier<'a> {
    model: &'a ViTModel,
    seq: TokenSequence,
}

impl<'a> ViTSubsetClassifier<'a> {
    pub fn new(model: &'a ViTModel, img: &InputImage) -> Result<Self> {
        Ok(Self {
            model,
            seq: model.tokenize(img)?,
        })
    }

    pub fn sequence(&self) -> &TokenSequence {
        &self.seq
    }
}

impl SubsetClassifier for ViTSubsetClassifier<'_> {
    fn token_count(&self) -> usize {
        self.seq.token_count()
    }

    fn evaluate(&self, subset: &TokenSubset) -> Result<Prediction> {
        self.model.forward_subset(&self.seq, subset)
    }
}

impl ImageClassifier for ViTModel {
    fn image_size(&self) -> usize {
        self.config().image_size
    }

    fn patch_size(&self) -> usize {
        self.config().patch_size
    }

    fn classify(&self, img: &InputImage) -> Result<Prediction> {
        self.predict(img)
    }
}

impl TokenModel for ViTModel {
    fn subset_classifier<'a>(&'a self, img: &InputImage) -> Result<Box<dyn SubsetClassifier + 'a>> {
        Ok(Box::new(ViTSubsetClassifier::new(self, img)?))
    }
}

/// Counts `evaluate` calls on the wrapped classifier.
pub struct CountingClassifier<C> {
    inner: C,
    calls: AtomicUsize,
}

impl<C> CountingClassifier<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }
}

impl<C: SubsetClassifier> SubsetClassifier for CountingClassifier<C> {
    fn token_count(&self) -> usize {
        self.inner.token_count()
    }

    fn evaluate(&self, subset: &TokenSubset) -> Result<Prediction> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(subset)
    }
}

impl<C: SubsetClassifier + ?Sized> SubsetClassifier for &C {
    fn token_count(&self) -> usize {
        (**self).token_count()
    }

    fn evaluate(&self, subset: &TokenSubset) -> Result<Prediction> {
        (**self).evaluate(subset)
    }
}

impl<C: SubsetClassifier + ?Sized> SubsetClassifier for Box<C> {
    fn token_count(&self) -> usize {
        (**self).token_count()
    }

    fn evaluate(&self, subset: &TokenSubset) -> Result<Prediction> {
        (**self).evaluate(subset)
    }
}

/// How independent evaluations are spread over threads.
///
/// Jobs are processed in waves of `wave_size`; inside a wave they run on a
/// dedicated pool of `workers` threads. Results always come back in job
/// order, so outputs never depend on either knob.
pub struct Scheduler {
    workers: usize,
    wave_size: Option<usize>,
    pool: Option<rayon::ThreadPool>,
}

impl Scheduler {
    pub fn sequential() -> Self {
        Self {
            workers: 1,
            wave_size: None,
            pool: None,
        }
    }

    pub fn new(workers: usize, wave_size: Option<usize>) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidConfig("worker count must be >= 1".into()));
        }
        if wave_size == Some(0) {
            return Err(Error::InvalidConfig("wave size must be >= 1".into()));
        }
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            workers,
            wave_size,
            pool,
        })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn wave_size(&self) -> Option<usize> {
        self.wave_size
    }

    /// Maps `f` over `jobs`, preserving order.
    pub fn map<T, R, F>(&self, jobs: &[T], f: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Result<R> + Sync + Send,
    {
        let wave = self.wave_size.unwrap_or(jobs.len()).max(1);
        let mut out = Vec::with_capacity(jobs.len());
        for chunk in jobs.chunks(wave) {
            match &self.pool {
                Some(pool) => {
                    let results: Vec<Result<R>> =
                        pool.install(|| chunk.par_iter().map(&f).collect());
                    for r in results {
                        out.push(r?);
                    }
                }
                None => {
                    for job in chunk {
                        out.push(f(job)?);
                    }
                }
            }
        }
        Ok(out)
    }
}

impl Default for Scheduler {
    fn default() -> Self {
        Self::sequential()
    }
}

impl std::fmt::Debug for Scheduler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scheduler")
            .field("workers", &self.workers)
            .field("wave_size", &self.wave_size)
            .finish()
    }
}
