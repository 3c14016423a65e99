//! Seeded synthetic storefront pages for the pruning corpus. Interactive
//! markup stays bounded while scripts, styles and non-interactive filler
//! scale the raw size from a few kilobytes to over a megabyte.

#![allow(dead_code)]

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &[
    "blue", "top", "cotton", "men", "tshirt", "women", "dress", "summer", "kids", "jeans", "polo", "brand", "sale",
    "review", "quality", "fabric", "size", "delivery", "return", "policy", "Tom & Jerry", "a < b", "\"quoted\"",
];

fn words(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn script(rng: &mut ChaCha8Rng, chars: usize) -> String {
    let mut s = String::from("<script>\nvar catalog = [");
    while s.len() < chars {
        let _ = write!(s, "{{id:{},name:'{}',tags:'<b>{}</b>'}},", rng.gen::<u16>(), words(rng, 2), words(rng, 1));
    }
    s.push_str("];\n</script>\n");
    s
}

fn style(rng: &mut ChaCha8Rng, chars: usize) -> String {
    let mut s = String::from("<style>\n");
    while s.len() < chars {
        let _ = writeln!(s, ".c{} > a:hover {{ color: #{:06x}; }}", rng.gen::<u16>(), rng.gen::<u32>() & 0xffffff);
    }
    s.push_str("</style>\n");
    s
}

fn nav(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::from("<header id=\"header\"><div class=\"header-middle\"><div class=\"container\"><ul class=\"nav navbar-nav\">");
    for (i, label) in ["Home", "Products", "Cart", "Signup / Login", "Contact us"].iter().enumerate() {
        let _ = write!(
            s,
            "<li><a href=\"/p{i}\"><svg class=\"icon\" viewBox=\"0 0 8 8\"><path d=\"M0 0h{}\"/></svg> {label}</a></li>",
            rng.gen_range(1..9)
        );
    }
    s.push_str("</ul></div></div></header>\n");
    s
}

fn card(rng: &mut ChaCha8Rng, i: usize) -> String {
    let depth = rng.gen_range(1..8);
    let mut s = String::new();
    for d in 0..depth {
        let _ = write!(s, "<div class=\"wrap-{d}\">");
    }
    let n = rng.gen_range(5..80);
    let _ = write!(
        s,
        "<div class=\"product\" id=\"product-{i}\"><img src=\"/img/{i}.png\" alt=\"{}\"><h3>{}</h3><p>{}</p>\
         <a href=\"/product_details/{i}\" class=\"btn btn-default\" data-product-id=\"{i}\">View Product</a>\
         <button type=\"button\" class=\"add-to-cart\" name=\"add-{i}\">Add to cart</button></div>",
        esc(&words(rng, 2)),
        esc(&words(rng, 3)),
        esc(&words(rng, n)),
    );
    for _ in 0..depth {
        s.push_str("</div>");
    }
    s.push('\n');
    s
}

fn form(rng: &mut ChaCha8Rng, i: usize) -> String {
    let mut s = format!("<section class=\"form-block\"><div><form action=\"/f{i}\" method=\"post\" id=\"form-{i}\">");
    let _ = write!(s, "<label for=\"email-{i}\">Email address for {}</label>", esc(&words(rng, 2)));
    let _ = write!(s, "<input type=\"email\" id=\"email-{i}\" name=\"email\" placeholder=\"Email\">");
    s.push_str("<input type=\"password\" name=\"password\" data-qa=\"login-password\">");
    if rng.gen_bool(0.5) {
        s.push_str("<select name=\"size\"><option value=\"s\">Small</option><option value=\"m\">Medium</option></select>");
    }
    if rng.gen_bool(0.5) {
        let _ = write!(s, "<textarea name=\"message\">{}</textarea>", esc(&words(rng, 40)));
    }
    s.push_str("<input type=\"checkbox\" name=\"newsletter\" value=\"1\">");
    let _ = write!(s, "<button type=\"submit\" class=\"btn\">{}</button>", esc(&words(rng, 1)));
    s.push_str("</form></div></section>\n");
    s
}

fn filler(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::from("<article class=\"review\"><div class=\"meta\"><span class=\"stars\">*****</span>");
    let _ = write!(s, "<!-- review {} -->", rng.gen::<u32>());
    for _ in 0..rng.gen_range(1..6) {
        let n = rng.gen_range(10..120);
        let _ = write!(s, "<div class=\"para\"><p>{}</p></div>", esc(&words(rng, n)));
    }
    s.push_str("<table><tr><td>size</td><td>M</td></tr><tr><td>fit</td><td>regular</td></tr></table>");
    s.push_str("</div></article>\n");
    s
}

/// Page `index` of the corpus with raw size near `target` characters.
pub fn page(index: u64, target: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0ffee + index);
    let mut s = String::from("<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"><title>Shop</title>\n");
    s.push_str(&style(&mut rng, target / 10));
    s.push_str(&script(&mut rng, target / 5));
    s.push_str("</head><body>\n");
    s.push_str(&nav(&mut rng));
    let cards = rng.gen_range(4..60);
    for i in 0..cards {
        s.push_str(&card(&mut rng, i));
        if i % 15 == 0 {
            s.push_str(&form(&mut rng, i));
        }
    }
    while s.len() < target {
        s.push_str(&filler(&mut rng));
    }
    s.push_str("<noscript><img src=\"/pixel.gif\" alt=\"\"></noscript>\n");
    s.push_str(&form(&mut rng, 999));
    s.push_str("</body></html>\n");
    s
}

/// Raw sizes for the generated part of the corpus; eleven exceed the
/// default budget before pruning.
pub const TARGETS: [usize; 28] = [
    4_000, 8_000, 12_000, 20_000, 30_000, 45_000, 60_000, 80_000, 100_000, 120_000, 150_000, 170_000, 190_000,
    199_000, 210_000, 250_000, 300_000, 350_000, 400_000, 500_000, 600_000, 750_000, 900_000, 1_000_000, 1_200_000,
    1_500_000, 90_000, 25_000,
];

pub fn corpus() -> Vec<(String, String)> {
    TARGETS
        .iter()
        .enumerate()
        .map(|(i, &t)| (format!("generated-{i:02}"), page(i as u64, t)))
        .collect()
}
