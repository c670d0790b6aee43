//! Every example must run to completion.

macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));

            #[test]
            fn runs() {
                run().expect(concat!($file, " should run"));
            }
        }
    };
}

example!(transform_roundtrip, "transform_roundtrip.rs");
example!(spherical_convolution, "spherical_convolution.rs");
example!(rotation_equivariance, "rotation_equivariance.rs");
example!(pooling, "pooling.rs");
example!(invariant_descriptors, "invariant_descriptors.rs");
example!(mesh_projection, "mesh_projection.rs");
example!(shape_alignment, "shape_alignment.rs");
example!(equivariance_report, "equivariance_report.rs");
example!(train_toy_classifier, "train_toy_classifier.rs");
example!(sft_benchmark, "sft_benchmark.rs");
