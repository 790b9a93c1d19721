//! Embedded manifolds, vector fields and frame bundles.

pub mod field;
pub mod frame;
pub mod manifold;

pub use field::{
    apply_word, field, lie_bracket, lie_bracket_exact, lie_bracket_fd, word_field, SharedField,
    VectorField, VfOneForm,
};
pub use frame::{
    canonical_horizontal_form, curvature_scalar, curvature_scalar_exact, horizontal_field, horizontal_form, FrameBundle,
    FrameBundlePoint, ProjectionConnection, SurfaceFrameData, BRACKET_CURVATURE_SIGN,
};
pub use manifold::{
    EmbeddedManifold, Euclidean, FreeSpace, Hyperboloid, ProductManifold, SharedManifold,
    SharedSpace, SpecialOrthogonal3, Sphere, StateProduct, StateSpace,
};
