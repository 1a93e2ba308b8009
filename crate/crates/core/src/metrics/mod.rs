//! Classifier evaluation and inter-annotator agreement.

mod agreement;
mod classification;

pub use agreement::{krippendorff_alpha, load_annotations, observed_agreement, AnnotationTable};
pub use classification::{
    cross_entropy, evaluate_classifier, macro_f1, roc_auc, ClassifierEval, ConfusionMatrix,
    PROB_CLIP,
};
