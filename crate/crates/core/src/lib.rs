//! Text-independent speaker identification with GMM supervectors and SVMs.
//!
//! The numeric core is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`). The aliases at the crate root fix it to `f64`, which is
//! what the command-line tool and the experiment harness use.

pub mod corpus;
pub mod dsp;
pub mod error;
pub mod features;
pub mod gmm;
pub mod harness;
pub mod normalize;
pub mod scalar;
pub mod svm;

mod binio;

pub use error::{Error, Result};
pub use features::{BaseFeature, FrontendSpec};
pub use normalize::NormalizerSpec;
pub use scalar::Real;

/// Floor applied before every logarithm of an energy.
pub const LOG_FLOOR: f64 = 1e-10;

pub type Waveform = corpus::Waveform<f64>;
pub type Utterance = corpus::Utterance<f64>;
pub type Corpus = corpus::Corpus<f64>;
pub type FrameMatrix = dsp::FrameMatrix<f64>;
pub type FeatureMatrix = features::FeatureMatrix<f64>;
pub type Frontend = features::Frontend<f64>;
pub type GmmModel = gmm::GmmModel<f64>;
pub type Supervector = gmm::Supervector<f64>;
pub type BinarySvm = svm::BinarySvm<f64>;
pub type MulticlassSvm = svm::MulticlassSvm<f64>;
