// Sample a centered tree and a directional schedule, locate a point, and
// round-trip both through the text format.

use kerf_lab::forests::parse_partitions;
use kerf_lab::rng::substream;
use kerf_lab::{CenteredTree, DirectionalSchedule, Partition, Point};

pub fn run() -> kerf_lab::Result<String> {
    let mut rng = substream(7, &[]);
    let tree = CenteredTree::sample(3, 2, &mut rng)?;
    let schedule = DirectionalSchedule::sample(3, 2, &mut rng)?;
    let x = Point::new(vec![0.3, 0.8])?;

    let leaf = tree.leaf_of(&x)?;
    println!("tree labels {:?}, x={x} falls in leaf {leaf} = {:?}", tree.labels(), tree.leaf_box(leaf)?);
    println!("schedule {:?}, split counts {:?}", schedule.sequence(), schedule.counts());
    println!("cell address {:?}", schedule.cell_of(&x)?);

    let text = tree.to_text() + &schedule.to_text();
    let parsed = parse_partitions(&text)?;
    println!("text form:\n{text}parsed back {} partitions", parsed.len());
    Ok(text)
}

fn main() -> kerf_lab::Result<()> {
    run().map(|_| ())
}
