use super::{ObjectClass, SceneSpec};

const NUMBER_WORDS: [&str; 7] = ["zero", "one", "two", "three", "four", "five", "six"];

fn number_word(k: usize) -> String {
    NUMBER_WORDS.get(k).map_or_else(|| k.to_string(), |w| w.to_string())
}

fn counted(k: usize, class: ObjectClass) -> String {
    if k == 1 {
        format!("one {}", class.name())
    } else {
        format!("{} {}", number_word(k), class.plural())
    }
}

/// Cell of a 3×3 grid over the image, as words.
pub fn position_phrase(cx: f64, cy: f64, width: u32, height: u32) -> &'static str {
    let cell = |v: f64, extent: u32| ((v / extent as f64 * 3.0).floor().max(0.0) as usize).min(2);
    const GRID: [[&str; 3]; 3] = [
        ["top left", "top", "top right"],
        ["left", "center", "right"],
        ["bottom left", "bottom", "bottom right"],
    ];
    GRID[cell(cy, height)][cell(cx, width)]
}

/// Object counts per class in taxonomy order, absent classes skipped.
fn class_counts(scene: &SceneSpec) -> Vec<(ObjectClass, usize)> {
    ObjectClass::ALL
        .iter()
        .map(|&c| (c, scene.objects.iter().filter(|o| o.class == c).count()))
        .filter(|&(_, k)| k > 0)
        .collect()
}

/// Five captions, one per template family:
///
/// 1. the count of the most frequent class ("there are two buildings in the scene"),
/// 2. the closest pair of objects of different classes,
/// 3. the most frequent class against the background,
/// 4. the grid position of the largest object,
/// 5. an inventory of every class with its count.
///
/// Scenes without objects use five background-only sentences instead.
pub fn caption_templates(scene: &SceneSpec) -> [String; 5] {
    let bg = scene.background.name();
    let counts = class_counts(scene);
    let Some(&(main, k)) = counts.iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))) else {
        return [
            format!("there is nothing in the {bg}"),
            format!("an empty {bg} with no objects"),
            format!("a wide {bg} scene"),
            format!("a plain stretch of {bg}"),
            format!("the image shows an empty {bg}"),
        ];
    };

    let first = if k == 1 {
        format!("there is one {} in the scene", main.name())
    } else {
        format!("there are {} in the scene", counted(k, main))
    };

    let objs = &scene.objects;
    let mut pair: Option<(f64, usize, usize)> = None;
    for i in 0..objs.len() {
        for j in i + 1..objs.len() {
            if objs[i].class == objs[j].class {
                continue;
            }
            let d = (objs[i].bbox.cx - objs[j].bbox.cx).hypot(objs[i].bbox.cy - objs[j].bbox.cy);
            if pair.is_none_or(|(best, _, _)| d < best) {
                pair = Some((d, i, j));
            }
        }
    }
    let second = match pair {
        Some((_, i, j)) => format!("a {} is near a {}", objs[i].class.name(), objs[j].class.name()),
        None if objs.len() > 1 => format!("a {} is near another {}", main.name(), main.name()),
        None => format!("a {} stands alone on the {bg}", main.name()),
    };

    let third = if k == 1 {
        format!("a single {} on a {bg}", main.name())
    } else {
        format!("{} scattered across a {bg}", main.plural())
    };

    let largest = objs
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.bbox.area().total_cmp(&b.bbox.area()).then(ib.cmp(ia)))
        .map(|(_, o)| o)
        .expect("scene has objects");
    let fourth = format!(
        "a {} at the {} of the image",
        largest.class.name(),
        position_phrase(largest.bbox.cx, largest.bbox.cy, scene.width, scene.height)
    );

    let parts: Vec<String> = counts.iter().map(|&(c, k)| counted(k, c)).collect();
    let listing = match parts.as_slice() {
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
        [] => unreachable!("scene has objects"),
    };
    let fifth = format!("the image shows {listing}");

    [first, second, third, fourth, fifth]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Background, PlacedObject};
    use crate::features::BoundingBox;

    fn obj(class: ObjectClass, cx: f64, cy: f64, s: f64) -> PlacedObject {
        PlacedObject {
            class,
            bbox: BoundingBox::new(cx, cy, s, s).unwrap(),
            color: class.color(),
        }
    }

    fn scene(objects: Vec<PlacedObject>) -> SceneSpec {
        SceneSpec {
            width: 64,
            height: 64,
            background: Background::Grassland,
            objects,
        }
    }

    #[test]
    fn two_buildings_and_a_pond() {
        let s = scene(vec![
            obj(ObjectClass::Building, 10.0, 10.0, 8.0),
            obj(ObjectClass::Building, 50.0, 50.0, 8.0),
            obj(ObjectClass::Pond, 20.0, 12.0, 12.0),
        ]);
        let c = caption_templates(&s);
        assert_eq!(c[0], "there are two buildings in the scene");
        assert_eq!(c[1], "a building is near a pond");
        assert_eq!(c[2], "buildings scattered across a grassland");
        assert_eq!(c[3], "a pond at the top left of the image");
        assert_eq!(c[4], "the image shows two buildings and one pond");
    }

    #[test]
    fn single_object() {
        let c = caption_templates(&scene(vec![obj(ObjectClass::Tank, 32.0, 32.0, 8.0)]));
        assert_eq!(c[0], "there is one tank in the scene");
        assert_eq!(c[1], "a tank stands alone on the grassland");
        assert_eq!(c[3], "a tank at the center of the image");
    }

    #[test]
    fn empty_scene_uses_background_templates() {
        let c = caption_templates(&scene(vec![]));
        assert!(c.iter().all(|s| s.contains("grassland")));
        for class in ObjectClass::ALL {
            assert!(c.iter().all(|s| !s.contains(class.name())));
        }
    }

    #[test]
    fn grid_positions() {
        assert_eq!(position_phrase(5.0, 5.0, 64, 64), "top left");
        assert_eq!(position_phrase(32.0, 60.0, 64, 64), "bottom");
        assert_eq!(position_phrase(64.0, 32.0, 64, 64), "right");
    }
}
