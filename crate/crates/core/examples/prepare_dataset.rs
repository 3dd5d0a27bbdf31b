//! Generate the two-population dataset, filter it, split it and round-trip a
//! snapshot.
//!
//!     cargo run --release --example prepare_dataset

use adatta::config::two_population_spec;
use adatta::data::{
    generate_synthetic_labeled, k_core_filter, load_snapshot, popularity_percentiles, save_snapshot,
    split_leave_one_out,
};

fn main() -> adatta::Result<()> {
    let syn = generate_synthetic_labeled(&two_population_spec(200, 42))?;
    let raw = &syn.dataset;
    println!(
        "generated {} users, {} items, {} interactions",
        raw.num_users(),
        raw.num_items(),
        raw.num_interactions()
    );

    let ds = k_core_filter(raw, 5)?;
    println!("after 5-core: {} users, {} items", ds.num_users(), ds.num_items());

    let split = split_leave_one_out(&ds);
    let s = &split.splits[0];
    println!(
        "user {}: {} training items, validation target {}, test target {}",
        ds.user_id(s.user),
        s.train_prefix.len(),
        ds.item_id(s.valid_target),
        ds.item_id(s.test_target)
    );

    let pop = popularity_percentiles(&ds)?;
    let top = (1..=ds.num_items()).max_by(|&a, &b| pop[a].total_cmp(&pop[b])).unwrap();
    println!("most popular item: {} (percentile {:.2})", ds.item_id(top), pop[top]);

    let path = std::env::temp_dir().join("adatta-example-dataset.json");
    save_snapshot(&ds, &path)?;
    assert_eq!(load_snapshot(&path)?, ds);
    println!("snapshot round-tripped through {}", path.display());
    Ok(())
}
