//! Print the system and user prompts for a query.
//!
//! cargo run --example prompt -- "a dog catches a frisbee" 8

use frameseg::data::{build_prompt, SYSTEM_PROMPT};

fn main() -> frameseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let query = args.next().unwrap_or_else(|| "Man in baseball cap eats before doing his interview.".into());
    let frames = args.next().and_then(|f| f.parse().ok()).unwrap_or(25);
    println!("{SYSTEM_PROMPT}\n");
    println!("{}", build_prompt(&query, frames)?);
    Ok(())
}
