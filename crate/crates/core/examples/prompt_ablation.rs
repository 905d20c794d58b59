//! Parse a structured prompt, render it back, and drop single context fields.

use radprm::corpus::{parse_prompt, render_prompt, AblationMask};

const PROMPT: &str = "Provide a description of the findings in the radiology study in comparison to the prior \
frontal image. INDICATION: Middle-aged man with possible pneumonia. TECHNIQUE: Anteroposterior (AP) and lateral \
chest radiographs. COMPARISON: Not applicable.";

fn main() -> radprm::Result<()> {
    let ctx = parse_prompt(PROMPT)?;
    println!("preamble:   {}", ctx.preamble);
    println!("indication: {}", ctx.indication);
    println!("technique:  {}", ctx.technique);
    println!("comparison: {}", ctx.comparison);
    assert_eq!(render_prompt(&ctx, AblationMask::IDENTITY), PROMPT);
    for (name, mask) in AblationMask::table_variants() {
        println!("\n[{name}]\n{}", render_prompt(&ctx, mask));
    }
    Ok(())
}
