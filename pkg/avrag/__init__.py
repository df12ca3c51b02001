"""Audio-visual retrieval, salient frame selection and grounded QA agents."""
