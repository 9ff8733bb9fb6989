use drcplan_web::{reach, Demo};

#[test]
fn ticks_grow_a_plan() {
    let mut d = Demo::case("corridor", 8).unwrap();
    assert_eq!(d.heat().len(), d.width() * d.height());
    let seeded = d.directions().iter().filter(|&&m| m != 0).count();
    for _ in 0..8 {
        d.tick();
    }
    assert_eq!(d.ticks(), 8);
    assert!(d.plan_text().contains('>'));
    assert!(d.directions().iter().filter(|&&m| m != 0).count() > seeded);
    assert!(d.heat().iter().any(|&v| v > 0.5));
    d.reset();
    assert_eq!(d.ticks(), 0);
}

#[test]
fn wta_toggle_changes_the_junction() {
    let arrows = |wta: bool| {
        let mut d = Demo::case("two_paths", 7).unwrap();
        d.set_wta(wta);
        for _ in 0..10 {
            d.tick();
        }
        d.directions().iter().filter(|m| m.count_ones() > 1).count()
    };
    assert_eq!(arrows(true), 0);
    assert!(arrows(false) > 0);
}

#[test]
fn episodes_and_errors() {
    let d = Demo::case("turn", 8).unwrap();
    assert!(d.solve().starts_with("true,"));
    assert!(Demo::case("spiral", 8).is_err());
    assert!(Demo::case("zigzag", 2).is_err());
    assert!(Demo::new("###").is_err());
}

#[test]
fn steering_extends_reach() {
    assert!(reach(1.2, 60, 60) > reach(1.0, 60, 60));
}
