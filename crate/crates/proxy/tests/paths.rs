use proptest::prelude::*;
use softverify_proxy::PathPolicy;

fn segment() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9_.-]{1,8}".prop_filter("no dot dirs", |s| s != "." && s != "..")
}

fn rel_path() -> impl Strategy<Value = String> {
    prop::collection::vec(segment(), 0..5).prop_map(|v| v.join("/"))
}

fn roots() -> impl Strategy<Value = (String, String)> {
    (prop::collection::vec(segment(), 1..4), prop::collection::vec(segment(), 1..4))
        .prop_map(|(a, b)| (format!("/{}", a.join("/")), format!("/{}", b.join("/"))))
        .prop_filter("roots must not nest", |(a, b)| PathPolicy::new(a, b).is_ok())
}

fn under(root: &str, rel: &str) -> String {
    if rel.is_empty() { root.to_string() } else { format!("{root}/{rel}") }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn user_paths_round_trip((canon, user) in roots(), rel in rel_path()) {
        let p = PathPolicy::new(&canon, &user).unwrap();
        let path = under(&user, &rel);
        let c = p.to_canonical(&path);
        prop_assert_eq!(&c, &under(&canon, &rel));
        prop_assert_eq!(p.to_user(&c), path);
    }

    #[test]
    fn canonical_paths_round_trip((canon, user) in roots(), rel in rel_path()) {
        let p = PathPolicy::new(&canon, &user).unwrap();
        let path = under(&canon, &rel);
        let u = p.to_user(&path);
        prop_assert_eq!(&u, &under(&user, &rel));
        prop_assert_eq!(p.to_canonical(&u), path);
    }

    #[test]
    fn paths_embedded_in_prose_round_trip(
        (canon, user) in roots(),
        rels in prop::collection::vec(rel_path(), 1..4),
        glue in prop::collection::vec("[ \n\t,;:()`'\"]{1,3}", 4),
    ) {
        let p = PathPolicy::new(&canon, &user).unwrap();
        let mut text = glue[0].clone();
        for (i, r) in rels.iter().enumerate() {
            text.push_str(&under(&user, r));
            text.push_str(&glue[(i + 1) % glue.len()]);
        }
        prop_assert_eq!(p.to_user(&p.to_canonical(&text)), text);
    }

    #[test]
    fn unrelated_text_is_untouched((canon, user) in roots(), s in "[a-z ]{0,40}") {
        let p = PathPolicy::new(&canon, &user).unwrap();
        prop_assert_eq!(p.to_canonical(&s), s.clone());
        prop_assert_eq!(p.to_user(&s), s);
    }
}
