use ragxlate::embedding::{embed, EmbeddingBackendConfig};

// Reference values from a separate script implementing the documented
// scheme (seeded FNV-1a buckets, 1 + ln(count), L2 normalization).
#[test]
fn local_dim64_frozen_vectors() {
    let cfg = EmbeddingBackendConfig::local(64, 512);
    let cases: [(&str, &[(usize, f64)]); 2] = [
        (
            "a = b",
            &[
                (34, 0.5773502691896258),
                (47, 0.5773502691896258),
                (62, 0.5773502691896258),
            ],
        ),
        (
            "x = x + 1;",
            &[
                (20, 0.3816141458138271),
                (36, 0.3816141458138271),
                (50, 0.3816141458138271),
                (61, 0.6461289150464732),
                (62, 0.3816141458138271),
            ],
        ),
    ];
    for (code, nonzero) in cases {
        let v = embed(code, &cfg).unwrap();
        assert_eq!(v.dim, 64);
        assert_eq!(v.model_id, "hashed-token-fnv1a-d64");
        let mut expected = vec![0.0; 64];
        for &(i, x) in nonzero {
            expected[i] = x;
        }
        for (i, (got, want)) in v.values.iter().zip(&expected).enumerate() {
            assert!((got - want).abs() < 1e-12, "{code:?} bucket {i}: {got} vs {want}");
        }
    }
}

#[test]
fn truncation_limits_tokens() {
    let short = EmbeddingBackendConfig::local(64, 3);
    assert_eq!(embed("a = b + c + d", &short).unwrap(), embed("a = b", &short).unwrap());
}
