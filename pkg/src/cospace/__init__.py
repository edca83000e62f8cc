"""Cross-modality shared-subspace learning (ridge and sparse CoSpace) with
manifold-alignment baselines and a classification evaluation harness."""
