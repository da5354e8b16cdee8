# Tools module initialization