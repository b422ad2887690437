//! HOG descriptors, an RBF support vector machine and sliding-window
//! fence detection.

pub mod detect;
pub mod hog;
pub mod model_io;
pub mod patches;
pub mod svm;

pub use detect::{detect_fence_svm, Detection, SvmDetection, SvmScanParams};
pub use hog::{cell_histograms, hog, preprocess, HogConfig, HogDescriptor};
pub use model_io::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC};
pub use patches::{
    load_patch_dir, synth_background_patch, synth_fence_patch, synth_patches, train_svm, window_descriptor,
    LabeledPatch,
};
pub use svm::{fit, rbf_kernel, stratified_folds, svm_decision, train_svm_descriptors, CvPoint, CvReport, SvmGrid, SvmModel};
