use proptest::prelude::*;

use cfrl::rng::{tag, SeedStream};
use cfrl::scm::checks::{counterfactual_average_deviation, mixed_average_deviation, noise_subsets, reconstruction_error};
use cfrl::scm::random::{random_case, random_table, RandomScmOptions};
use cfrl::scm::text::{parse_scm, to_text};
use cfrl::scm::{uniformize, Intervention, Observation};

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counterfactuals_average_to_the_intervention(seed in any::<u64>()) {
        let c = random_case(RandomScmOptions::default(), &mut SeedStream::new(seed).rng(tag::VERIFY, 0));
        let d = counterfactual_average_deviation(&c.scm, &c.intervention, &strs(&c.observed), &strs(&c.query)).unwrap();
        prop_assert!(d <= 1e-10, "deviation {d}");
    }

    #[test]
    fn mixed_samples_average_to_the_intervention(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let opts = RandomScmOptions { max_nodes: 4, max_support: 3, ..Default::default() };
        let c = random_case(opts, &mut SeedStream::new(seed).rng(tag::VERIFY, 0));
        let subsets = noise_subsets(&c.scm);
        let s = pick.get(&subsets);
        let d = mixed_average_deviation(&c.scm, &c.intervention, &strs(&c.observed), &strs(s), &strs(&c.query)).unwrap();
        prop_assert!(d <= 1e-10, "deviation {d} for subset {s:?}");
    }

    #[test]
    fn uniformized_tables_reconstruct(seed in any::<u64>(), rows in 1usize..6, values in 1usize..6) {
        let t = random_table(rows, values, &mut SeedStream::new(seed).rng(tag::VERIFY, 1));
        let u = uniformize("U", &t).unwrap();
        prop_assert!(reconstruction_error(&t, &u) <= 1e-12);
        prop_assert_eq!(u.breakpoints.first().copied(), Some(0.0));
        prop_assert_eq!(u.breakpoints.last().copied(), Some(1.0));
        prop_assert!(u.breakpoints.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn posterior_mass_is_normalized(seed in any::<u64>()) {
        let c = random_case(RandomScmOptions::default(), &mut SeedStream::new(seed).rng(tag::VERIFY, 0));
        let (_, x) = c.scm.sample_prior(&mut SeedStream::new(seed).rng(tag::VERIFY, 2));
        let labels = c.scm.assignment_labels(&x);
        let mut obs = Observation::new();
        for id in &c.observed {
            obs = obs.with(id.clone(), labels[id].clone());
        }
        let post = c.scm.infer_noise_posterior(&obs).unwrap();
        let mass: f64 = post.marginal(&c.scm, &[c.scm.noises()[0].id.as_str()]).unwrap().total();
        prop_assert!((mass - 1.0).abs() < 1e-12);
        // with no intervention the counterfactual of an observed node is the observation
        let cf = c.scm.counterfactual_query(&obs, &Intervention::new(), &strs(&c.observed)).unwrap();
        let vals: Vec<&str> = c.observed.iter().map(|id| labels[id].as_str()).collect();
        prop_assert!((cf.prob(&vals) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip(seed in any::<u64>()) {
        let c = random_case(RandomScmOptions::default(), &mut SeedStream::new(seed).rng(tag::VERIFY, 0));
        let again = parse_scm(&to_text(&c.scm)).unwrap();
        prop_assert_eq!(again.scm, c.scm);
    }
}

#[test]
fn contradictory_evidence_is_reported() {
    let file = parse_scm(include_str!("../fixtures/two_coin.scm")).unwrap();
    let obs = Observation::new().with("A", "a2");
    assert!(matches!(file.scm.infer_noise_posterior(&obs), Err(cfrl::Error::Contradiction)));
}
