use articflow_core::eval::{normalized_distance, success};

#[test]
fn normalized_distance_hand_values() {
    let cases = [
        // (init, end, goal, expected)
        (0.0, 0.0, 1.0, 1.0),
        (0.0, 1.0, 1.0, 0.0),
        (0.0, 0.75, 1.0, 0.25),
        (0.25, 0.5, 0.75, 0.5),
        (0.0, 1.2, 1.0, 0.2),
        (1.0, 0.4, 0.0, 0.4),
        (-0.5, 0.3, 0.5, 0.2),
        (0.0, 1.3962634015954636, 1.5707963267948966, 0.11111111111111108),
    ];
    for (i, e, g, want) in cases {
        let got = normalized_distance(i, e, g).unwrap();
        assert!((got - want).abs() < 1e-12, "({i}, {e}, {g}) -> {got}, expected {want}");
    }
    assert!(normalized_distance(0.3, 0.1, 0.3).is_err());
}

#[test]
fn success_boundary_is_inclusive() {
    assert!(success(0.1, 0.1));
    assert!(success(0.0, 0.1));
    assert!(!success(0.1 + 1e-12, 0.1));
    assert!(!success(f64::NAN, 0.1));
    let e = normalized_distance(0.0, 0.9, 1.0).unwrap();
    assert_eq!(e, 0.09999999999999998);
    assert!(success(e, 0.1));
}
