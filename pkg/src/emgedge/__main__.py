from emgedge.cli import main

raise SystemExit(main())
