from .assemble import FAMILIES, SectionFeaturizer, assemble_features, build_vocabularies
from .doc2vec import DocVectorModel, infer_docvec, infer_docvecs, train_doc2vec
from .lda import TopicModel, infer_topics, lda_features, train_lda
from .lexical import bow_features, heading_features, length_features, pos_features, position_feature
from .sparse import FeatureSpace, SparseVector, Vocabulary, build_vocabulary, from_csr, to_csr

__all__ = [
    "FAMILIES", "SectionFeaturizer", "assemble_features", "build_vocabularies",
    "DocVectorModel", "infer_docvec", "infer_docvecs", "train_doc2vec",
    "TopicModel", "infer_topics", "lda_features", "train_lda",
    "bow_features", "heading_features", "length_features", "pos_features", "position_feature",
    "FeatureSpace", "SparseVector", "Vocabulary", "build_vocabulary", "from_csr", "to_csr",
]
