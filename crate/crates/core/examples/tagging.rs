//! Tag teacher utterances, then extend the lexicon with a new rule.

use parliament::tagger::{Rule, Tag};
use parliament::{default_lexicon, tag_stimulus, ContextTag, Stimulus};

fn main() {
    let mut lexicon = default_lexicon();
    let lines = [
        "Solve for x: 2x + 5 = 13",
        "Great job! What is the perimeter of this rectangle?",
        "Come to the board and solve it in front of the class.",
        "Mistakes help your brain grow.",
        "Let's look at vectors.",
    ];
    for (i, text) in lines.iter().enumerate() {
        let tags = tag_stimulus(&Stimulus::new(*text, i as u32 + 1), &lexicon);
        println!(
            "{text:<55} {:?} {:?}",
            tags.context_tags, tags.intervention_tags
        );
    }

    lexicon.push(Rule::new("vectors", Tag::Context(ContextTag::Geometry)).unwrap());
    let tags = tag_stimulus(&Stimulus::new("Let's look at vectors.", 6), &lexicon);
    println!("\nwith a `vectors` rule: {:?}", tags.context_tags);
}
