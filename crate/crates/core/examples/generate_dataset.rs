// Synthesize a small dataset, write it to disk and read it back.

use feedflow::dataset::{synthesize_dataset, ClassCounts, Dataset, DatasetConfig};
use feedflow::traces::BandwidthClass;

pub fn run_example() -> feedflow::Result<Dataset> {
    let config = DatasetConfig {
        traces_per_class: ClassCounts { low: 2, medium: 2, high: 2 },
        num_videos: 6,
        num_users: 3,
        ..DatasetConfig::default()
    };
    let ds = synthesize_dataset(&config, 42)?;

    let dir = std::env::temp_dir().join(format!("feedflow-example-{}", std::process::id()));
    ds.write_dir(&dir)?;
    let back = Dataset::read_dir(&dir)?;
    std::fs::remove_dir_all(&dir)?;
    assert_eq!(back.videos, ds.videos);

    for class in BandwidthClass::ALL {
        for t in ds.traces_of(class) {
            println!("{:<12} {:<6} mean {:.2} Mbps", t.name, class.as_str(), t.trace.mean_mbps());
        }
    }
    println!("{} videos, {} users, ladder {:?} kbps", ds.videos.len(), ds.users.len(), ds.ladder().levels());
    Ok(ds)
}

fn main() -> feedflow::Result<()> {
    run_example().map(|_| ())
}
