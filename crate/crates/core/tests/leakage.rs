//! Model inputs may only depend on records up to the split year: dropping
//! every later record must leave the rendered text unchanged.

use lifetraj::codebook::Codebook;
use lifetraj::registerdata::{cohort_filter, generate_population, PersonHistory, SynthConfig};
use lifetraj::textualize::{render_text, TemplateSet};
use lifetraj::trajectory::{build_static_only, build_trajectory, BuildOptions};

#[test]
fn text_ignores_records_after_split() {
    let cfg = SynthConfig { population_size: 800, seed: 11, ..Default::default() };
    let pop = generate_population(&cfg).unwrap();
    let book = Codebook::bundled();
    let templates = TemplateSet::bundled();
    let cohort = cohort_filter(&pop.histories, cfg.split_year);
    assert!(cohort.len() > 700);
    let mut differing_futures = 0;
    for h in &cohort {
        let truncated = PersonHistory::new(h.person_id.clone(), h.up_to(cfg.split_year).to_vec());
        differing_futures += usize::from(truncated.records.len() < h.records.len());
        for opts in [BuildOptions::default(), BuildOptions { strict_codes: true, ..Default::default() }] {
            let full = build_trajectory(h, &book, cfg.split_year, opts).unwrap();
            let cut = build_trajectory(&truncated, &book, cfg.split_year, opts).unwrap();
            assert_eq!(full, cut, "{}", h.person_id);
            assert_eq!(render_text(&full, &templates).unwrap(), render_text(&cut, &templates).unwrap());
        }
        let full = build_static_only(h, &book, cfg.split_year, BuildOptions::default()).unwrap();
        let cut = build_static_only(&truncated, &book, cfg.split_year, BuildOptions::default()).unwrap();
        assert_eq!(render_text(&full, &templates).unwrap(), render_text(&cut, &templates).unwrap());
    }
    assert_eq!(differing_futures, cohort.len(), "every cohort member has post-split records");
}

#[test]
fn altered_future_does_not_change_text() {
    let cfg = SynthConfig { population_size: 200, seed: 12, ..Default::default() };
    let pop = generate_population(&cfg).unwrap();
    let book = Codebook::bundled();
    let templates = TemplateSet::bundled();
    for h in cohort_filter(&pop.histories, cfg.split_year) {
        let mut altered = h.clone();
        for r in altered.records.iter_mut().filter(|r| r.year > cfg.split_year) {
            r.residence_municipality = if r.residence_municipality == "100" { "101".into() } else { "100".into() };
            r.child_status = "1".into();
            r.income_percentile = 99;
        }
        let a = build_trajectory(&h, &book, cfg.split_year, BuildOptions::default()).unwrap();
        let b = build_trajectory(&altered, &book, cfg.split_year, BuildOptions::default()).unwrap();
        assert_eq!(render_text(&a, &templates).unwrap(), render_text(&b, &templates).unwrap());
    }
}
