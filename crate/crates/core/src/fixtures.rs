//! Worked examples shipped with the crate. The values are built through the
//! model API; the documents in `fixtures/` describe the same values.

use crate::ids::UnitId;
use crate::model::{
    AdvantageFlags, Consumer, CostCategory, Costs, ServiceEdge, Source, SourcingEquilibrium,
    TitleRecord, Unit,
};
use crate::plan::{GuardedStep, Plan, Thread};
use crate::scale::SourceType;
use crate::transform::{
    apply_progression, Bindings, Progression, Step, SubunitRef, TransformationScope,
};

pub const SCN1_MEQ: &str = include_str!("../fixtures/scn1.meq");
pub const SCN1_MPL: &str = include_str!("../fixtures/scn1.mpl");
pub const MUSEUM_MEQ: &str = include_str!("../fixtures/museum.meq");
pub const MUSEUM_MPL: &str = include_str!("../fixtures/museum.mpl");

fn unit(
    eq: &mut SourcingEquilibrium,
    id: &str,
    name: &str,
    mission: &str,
    subunits: &[(&str, &str)],
) {
    let mut u = Unit::new(id);
    u.name = name.to_owned();
    u.mission = mission.to_owned();
    eq.insert_unit(u).expect("fresh unit");
    for (sid, sname) in subunits {
        eq.insert_subunit(&UnitId::new(id), *sid, *sname)
            .expect("fresh subunit");
    }
}

fn titled(eq: &mut SourcingEquilibrium, source: Source, title: TitleRecord) {
    eq.insert_source(source).expect("fresh source");
    eq.insert_title(title).expect("valid title");
}

/// Desktop support in subunit B of unit A, before outsourcing to X.
pub fn scn1_before() -> SourcingEquilibrium {
    let mut eq = SourcingEquilibrium::new();
    unit(
        &mut eq,
        "A",
        "Alpha Insurance",
        "insurance products for private customers",
        &[("B", "Desktop support"), ("Ops", "Operations")],
    );
    unit(&mut eq, "C", "Licensor", "", &[("Legal", "")]);
    unit(
        &mut eq,
        "X",
        "Xsource Services",
        "IT services",
        &[("Y", "Service desk")],
    );

    titled(
        &mut eq,
        Source::new("p1", SourceType::Persons)
            .with_costs(Costs::default().with(CostCategory::Personnel, 50.0)),
        TitleRecord::new("p1", 1, "A", "B"),
    );
    titled(
        &mut eq,
        Source::new("h1", SourceType::ToolsAndEquipment).with_costs(
            Costs::default()
                .with(CostCategory::CapitalOwned, 20.0)
                .with(CostCategory::OperationalCosts, 5.0),
        ),
        TitleRecord::new("h1", 1, "A", "B"),
    );
    titled(
        &mut eq,
        Source::new("l1", SourceType::Ipr)
            .with_costs(Costs::default().with(CostCategory::LeaseRentLicense, 10.0)),
        TitleRecord::new("l1", 2, "A", "B").with_third_party("C"),
    );
    eq.insert_service(ServiceEdge::new(
        "svc_desktop",
        "B",
        Consumer::Subunit("Ops".into()),
        10.0,
    ))
    .expect("valid service");
    eq
}

pub fn scn1_scope() -> TransformationScope {
    TransformationScope::new("A", "B", ["p1".into(), "h1".into(), "l1".into()])
        .with_insourcer("X", "Y")
}

pub fn scn1_steps() -> Vec<Step> {
    let xy = SubunitRef::new("X", "Y");
    vec![
        Step::TransferTitle {
            source: "p1".into(),
            to: xy.clone(),
            level: 8,
            bindings: Bindings::default(),
        },
        Step::ChangeTitleLevel {
            source: "h1".into(),
            level: 3,
            bindings: Bindings {
                counterparty: Some("X".into()),
                ..Bindings::default()
            },
        },
        Step::AbandonTitle {
            source: "l1".into(),
        },
        Step::MoveService {
            service: "svc_desktop".into(),
            to: xy,
        },
        Step::FinancialTransfer {
            payer: "X".into(),
            payee: "A".into(),
            amount: 100.0,
        },
    ]
}

pub fn scn1_progression() -> Progression {
    Progression::new(scn1_steps(), scn1_scope()).expect("non-empty")
}

pub fn scn1_plan() -> Plan {
    Plan {
        id: "scn1".into(),
        equilibrium: Some("scn1.meq".into()),
        scope: scn1_scope(),
        threads: vec![Thread {
            name: "main".into(),
            steps: scn1_steps().into_iter().map(GuardedStep::new).collect(),
        }],
    }
}

pub fn scn1_after() -> SourcingEquilibrium {
    apply_progression(&scn1_before(), &scn1_progression())
        .expect("scn1 progression applies")
        .0
}

/// A museum whose painting defines the museum itself.
pub fn museum_before() -> SourcingEquilibrium {
    let mut eq = SourcingEquilibrium::new();
    unit(
        &mut eq,
        "A",
        "City Museum",
        "exhibit the collection",
        &[("B", "Exhibitions")],
    );
    unit(&mut eq, "X", "Art Logistics", "", &[("Y", "Storage")]);
    titled(
        &mut eq,
        Source::new("painting", SourceType::WorksOfArt)
            .critical_for("A")
            .with_advantage(AdvantageFlags::ALL)
            .with_costs(
                Costs::default()
                    .with(CostCategory::CapitalOwned, 500.0)
                    .with(CostCategory::Insurance, 12.0),
            ),
        TitleRecord::new("painting", 1, "A", "B"),
    );
    titled(
        &mut eq,
        Source::new("guard1", SourceType::Persons)
            .with_costs(Costs::default().with(CostCategory::Personnel, 40.0)),
        TitleRecord::new("guard1", 1, "A", "B"),
    );
    eq
}

pub fn museum_scope() -> TransformationScope {
    TransformationScope::new("A", "B", ["painting".into(), "guard1".into()])
        .with_insourcer("X", "Y")
}

pub fn museum_plan() -> Plan {
    let xy = SubunitRef::new("X", "Y");
    Plan {
        id: "museum".into(),
        equilibrium: Some("museum.meq".into()),
        scope: museum_scope(),
        threads: vec![Thread {
            name: "main".into(),
            steps: vec![
                GuardedStep::new(Step::TransferTitle {
                    source: "painting".into(),
                    to: xy.clone(),
                    level: 6,
                    bindings: Bindings::default(),
                }),
                GuardedStep::new(Step::TransferTitle {
                    source: "guard1".into(),
                    to: xy,
                    level: 8,
                    bindings: Bindings::default(),
                }),
            ],
        }],
    }
}
