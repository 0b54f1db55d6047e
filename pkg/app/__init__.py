# Bryant4 surface toolkit
